"""Command line harness: ``sentorder {prepare,train,eval,compare}``.

Settings come from (lowest to highest precedence) built-in defaults, the
``--paper-scale`` preset, a flat ``key = value`` config file, and CLI flags.
Every run prints the fully resolved config before doing anything.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .base import BaseOrderer, instance_for, load_model, predicted_positions
from .checkpoint import CheckpointError
from .corpus import (
    SyntheticSpec,
    derive_seed,
    generate_synthetic_corpus,
    load_corpus,
    load_embeddings,
    write_corpus,
)
from .firstnext import FirstNextOrderer
from .metrics import MetricsReport, evaluate
from .pairwise import PairwiseOrderer
from .regression import RegressionOrderer

MODEL_KINDS = ("bow-linear", "cbow", "cnn", "lstm", "pairwise", "firstnext", "context-regression")

PAPER_SCALE = {
    "embedding_dim": 300,
    "feature_maps": 1024,
    "hidden_size": 1024,
    "context_dim": 1024,
    "max_len": 64,
    "epochs": 150,
    "steps_per_epoch": 100,
    "batch_docs": 128,
    "lr": 1e-4,
    "weight_decay": 1e-4,
    "vocab_unigrams": 3000,
    "vocab_bigrams": 2000,
    "vocab_trigrams": 1000,
    "beam_width": 100,
}


@dataclass
class RunConfig:
    model: str = "lstm"
    encoder: str = "lstm"
    embedding_dim: int = 16
    feature_maps: int = 32
    filter_length: int = 3
    hidden_size: int = 32
    context_dim: int = 32
    context_pooling: str = "lstm"
    share_context_encoder: bool = False
    cell_form: str = "standard"
    max_len: int = 64
    vocab_unigrams: int = 3000
    vocab_bigrams: int = 2000
    vocab_trigrams: int = 1000
    epochs: int = 30
    steps_per_epoch: int = 100
    batch_docs: int = 16
    patience: int = 10
    lr: float = 3e-3
    weight_decay: float = 1e-4
    seed: int = 0
    corpus: str = ""
    embeddings: str = ""
    oov_policy: str = "zeros"
    synthetic_num_docs: int = 2000
    synthetic_min_len: int = 2
    synthetic_max_len: int = 8
    synthetic_vocab_size: int = 50
    synthetic_positional: bool = True
    synthetic_context: bool = False
    synthetic_transition: bool = False
    synthetic_marker_noise: float = 0.0
    synthetic_link_noise: float = 0.0
    train_ratio: float = 0.8
    valid_ratio: float = 0.1
    test_ratio: float = 0.1
    beam_width: int = 100
    pair_mode: str = "adjacent"
    score_mode: str = "adjacent-pairs"
    exhaustive_cap: int = 5
    fn_negatives_per_positive: int = 1
    fn_include_candidate_in_context: bool = True
    paper_scale: bool = False

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        for name in ("embedding_dim", "feature_maps", "hidden_size", "context_dim", "max_len",
                     "batch_docs", "beam_width", "filter_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.steps_per_epoch < 0 or self.patience < 0:
            raise ValueError("epochs, steps_per_epoch and patience must be >= 0")
        ratios = (self.train_ratio, self.valid_ratio, self.test_ratio)
        if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must be non-negative and sum to 1, got {ratios}")
        if self.pair_mode.replace("-", "_") not in ("adjacent", "random_negative"):
            raise ValueError(f"unknown pair mode {self.pair_mode!r}")

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            num_docs=self.synthetic_num_docs,
            len_range=(self.synthetic_min_len, self.synthetic_max_len),
            vocab_size=self.synthetic_vocab_size,
            positional_signal=self.synthetic_positional,
            context_signal=self.synthetic_context,
            transition_signal=self.synthetic_transition,
            marker_noise=self.synthetic_marker_noise,
            link_noise=self.synthetic_link_noise,
        )

    def render(self) -> str:
        return "\n".join(f"{f.name} = {_format(getattr(self, f.name))}" for f in fields(self)) + "\n"


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(name: str, raw: str, kind):
    kind = {"int": int, "float": float, "bool": bool, "str": str}.get(kind, kind)
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw.strip())
    except ValueError:
        raise ValueError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value, _FIELD_TYPES[key])
    return out


def resolve_config(config_path: str | None, overrides: dict) -> RunConfig:
    file_values = parse_config_file(config_path) if config_path else {}
    merged: dict = {}
    use_preset = overrides.get("paper_scale", file_values.get("paper_scale", False))
    if use_preset:
        merged.update(PAPER_SCALE)
    merged.update(file_values)
    merged.update(overrides)
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


# -- model construction ---------------------------------------------------------

def build_estimator(cfg: RunConfig, embeddings=None) -> BaseOrderer:
    common = dict(
        embedding_dim=cfg.embedding_dim,
        feature_maps=cfg.feature_maps,
        filter_length=cfg.filter_length,
        hidden_size=cfg.hidden_size,
        cell_form=cfg.cell_form,
        max_len=cfg.max_len,
        epochs=cfg.epochs,
        steps_per_epoch=cfg.steps_per_epoch,
        batch_docs=cfg.batch_docs,
        patience=cfg.patience,
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        embeddings=embeddings,
        oov_policy=cfg.oov_policy,
        random_state=cfg.seed,
    )
    if cfg.model in ("bow-linear", "cbow", "cnn", "lstm", "context-regression"):
        encoder = {"bow-linear": "bow", "context-regression": cfg.encoder}.get(cfg.model, cfg.model)
        return RegressionOrderer(
            encoder=encoder,
            use_context=cfg.model == "context-regression",
            context_dim=cfg.context_dim,
            context_pooling=cfg.context_pooling,
            share_context_encoder=cfg.share_context_encoder,
            vocab_sizes=(cfg.vocab_unigrams, cfg.vocab_bigrams, cfg.vocab_trigrams),
            **common,
        )
    if cfg.model == "pairwise":
        return PairwiseOrderer(
            encoder=cfg.encoder,
            pair_mode=cfg.pair_mode.replace("-", "_"),
            score_mode=cfg.score_mode,
            beam_width=cfg.beam_width,
            exhaustive_cap=cfg.exhaustive_cap,
            **common,
        )
    return FirstNextOrderer(
        encoder=cfg.encoder,
        include_candidate_in_context=cfg.fn_include_candidate_in_context,
        negatives_per_positive=cfg.fn_negatives_per_positive,
        context_dim=cfg.context_dim,
        **common,
    )


# -- commands -------------------------------------------------------------------

def split_documents(docs, ratios: tuple[float, float, float], seed: int):
    """Deterministic split by seeded hash of document id; exact counts per ratio."""
    keyed = sorted(docs, key=lambda d: (derive_seed(seed, "split", d.id), d.id))
    n = len(keyed)
    n_valid = int(round(ratios[1] * n))
    n_test = int(round(ratios[2] * n))
    n_train = n - n_valid - n_test
    train_ids = {d.id for d in keyed[:n_train]}
    valid_ids = {d.id for d in keyed[n_train : n_train + n_valid]}
    pick = lambda ids: [d for d in docs if d.id in ids]  # noqa: E731
    test_ids = {d.id for d in keyed[n_train + n_valid :]}
    return pick(train_ids), pick(valid_ids), pick(test_ids)


def cmd_prepare(cfg: RunConfig, out_dir: Path) -> dict:
    if cfg.corpus:
        docs = load_corpus(cfg.corpus)
        source = {"corpus": cfg.corpus}
    else:
        docs = generate_synthetic_corpus(cfg.synthetic_spec(), seed=cfg.seed)
        source = {"synthetic": dataclasses.asdict(cfg.synthetic_spec())}
    out_dir.mkdir(parents=True, exist_ok=True)
    splits = split_documents(docs, (cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio), cfg.seed)
    manifest = {"seed": cfg.seed, "ratios": [cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio], **source}
    for name, part in zip(("train", "valid", "test"), splits):
        write_corpus(part, out_dir / f"{name}.jsonl")
        manifest[f"{name}_count"] = len(part)
    with open(out_dir / "splits.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _write_history(model: BaseOrderer, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "valid_KT"])
        for epoch, loss, kt in model.history_:
            writer.writerow([epoch, repr(loss), repr(kt)])


def cmd_train(cfg: RunConfig, data_dir: Path, out_dir: Path, resume: bool = False, epoch_limit: int | None = None):
    train = load_corpus(data_dir / "train.jsonl")
    valid = load_corpus(data_dir / "valid.jsonl")
    if not train or not valid:
        raise ValueError("train and valid splits must be non-empty")
    out_dir.mkdir(parents=True, exist_ok=True)
    state_path = out_dir / "train_state.json"
    if resume:
        if not state_path.exists():
            raise FileNotFoundError(f"no training state to resume at {state_path}")
        model = load_model(state_path)
        if model_kind_of(model) != cfg.model:
            raise ValueError(f"resumed state holds a {model_kind_of(model)} model, config asks for {cfg.model}")
        if model.get_params()["random_state"] != cfg.seed:
            raise ValueError("resumed state was trained with a different seed")
    else:
        embeddings = load_embeddings(cfg.embeddings, cfg.oov_policy, cfg.seed) if cfg.embeddings else None
        model = build_estimator(cfg, embeddings)
        model.initialize(train)

    budget = {"left": epoch_limit}

    class _Pause(Exception):
        pass

    def on_epoch(m: BaseOrderer) -> None:
        m.save_training_state(state_path)
        if budget["left"] is not None:
            budget["left"] -= 1
            if budget["left"] <= 0 and not m.train_state_.done and m.train_state_.epoch < m.epochs:
                raise _Pause

    try:
        model.continue_fit(train, valid, on_epoch=on_epoch)
    except _Pause:
        model.history_ = list(model.train_state_.history)
        _write_history(model, out_dir / "history.csv")
        return model, None
    model.save_training_state(state_path)
    meta_model = out_dir / "model.json"
    model.save(meta_model)
    _write_history(model, out_dir / "history.csv")
    return model, model.evaluate(valid)


def cmd_eval(checkpoint: Path, split: Path, out_dir: Path, seed: int, expect_model: str | None = None) -> MetricsReport:
    model = load_model(checkpoint)
    if expect_model is not None and model_kind_of(model) != expect_model:
        raise CheckpointError(f"checkpoint holds a {model_kind_of(model)} model, config asks for {expect_model}")
    docs = load_corpus(split)
    model.random_state = seed
    instances = [instance_for(d, seed) for d in docs]
    model.decode_counts_ = {"exhaustive": 0, "beam": 0}
    orders = model.predict(instances)
    report = evaluate(
        [predicted_positions(i, o) for i, o in zip(instances, orders)],
        [list(range(len(i))) for i in instances],
    )
    report.extra = {"model": model_kind_of(model), "split": str(split), "seed": seed}
    if isinstance(model, PairwiseOrderer):
        report.extra["decode_counts"] = dict(model.decode_counts_)
    manifest = split.parent / "splits.json"
    if manifest.exists():
        with open(manifest, encoding="utf-8") as fh:
            report.extra["split_ratios"] = json.load(fh).get("ratios")
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_json(out_dir / "report.json")
    report.write_by_length_csv(out_dir / "by_length.csv")
    return report


def model_kind_of(model: BaseOrderer) -> str:
    if isinstance(model, RegressionOrderer):
        if model.use_context:
            return "context-regression"
        return "bow-linear" if model.encoder == "bow" else model.encoder
    return model.model_kind


def cmd_compare(paths: list[Path], names: list[str] | None = None) -> list[dict]:
    if not paths:
        raise ValueError("compare needs at least one report")
    rows = []
    for i, path in enumerate(paths):
        try:
            with open(path, encoding="utf-8") as fh:
                report = MetricsReport.from_dict(json.load(fh))
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: malformed report ({exc})") from None
        name = names[i] if names else report.extra.get("model", Path(path).parent.name)
        rows.append({"model": name, "PMR": report.pmr, "KT": report.kt_mean, "PA": report.pa})
    return rows


def render_table(rows: list[dict]) -> str:
    header = ["model", "PMR", "KT", "PA"]
    cells = [header] + [
        [str(r["model"])] + ["-" if r[k] is None else f"{r[k]:.3f}" for k in header[1:]] for r in rows
    ]
    widths = [max(len(row[c]) for row in cells) for c in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(row[c].ljust(widths[c]) if c == 0 else row[c].rjust(widths[c]) for c in range(len(header))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# -- argument parsing -----------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = {"int": int, "float": float, "bool": bool, "str": str}.get(f.type, f.type)
        if kind is bool:
            parser.add_argument(flag, dest=f.name, nargs="?", const="true", default=None, metavar="BOOL")
        else:
            parser.add_argument(flag, dest=f.name, default=None, metavar=kind.__name__.upper())


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            out[f.name] = _coerce(f.name, str(raw), f.type)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentorder", description="Sentence ordering experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build train/valid/test corpus files")
    p.add_argument("--out", required=True, type=Path)
    _add_config_flags(p)

    p = sub.add_parser("train", help="train a model on a prepared corpus")
    p.add_argument("--data", required=True, type=Path, help="directory written by prepare")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--resume", action="store_true", help="continue from OUT/train_state.json")
    p.add_argument("--epoch-limit", type=int, default=None, help="stop this invocation after N epochs")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="score a checkpoint on a corpus split")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--split", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--check-model", action="store_true", help="fail unless the checkpoint matches --model")
    _add_config_flags(p)

    p = sub.add_parser("compare", help="tabulate several report.json files")
    p.add_argument("reports", nargs="+", type=Path)
    p.add_argument("--names", nargs="*", default=None)
    p.add_argument("--out", type=Path, default=None, help="write the table as CSV here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            if args.names and len(args.names) != len(args.reports):
                raise ValueError("--names must match the number of reports")
            rows = cmd_compare(args.reports, args.names)
            sys.stdout.write(render_table(rows))
            if args.out:
                with open(args.out, "w", newline="", encoding="utf-8") as fh:
                    writer = csv.DictWriter(fh, fieldnames=["model", "PMR", "KT", "PA"])
                    writer.writeheader()
                    for r in rows:
                        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.items()})
            return 0

        cfg = resolve_config(args.config, _overrides(args))
        sys.stdout.write("# resolved config\n" + cfg.render())
        sys.stdout.flush()
        if args.command == "prepare":
            manifest = cmd_prepare(cfg, args.out)
            print(f"wrote {manifest['train_count']}/{manifest['valid_count']}/{manifest['test_count']} "
                  f"train/valid/test documents to {args.out}")
        elif args.command == "train":
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "config.txt").write_text(cfg.render(), encoding="utf-8")
            model, report = cmd_train(cfg, args.data, args.out, args.resume, args.epoch_limit)
            if report is None:
                print(f"paused after epoch {model.train_state_.epoch}; rerun with --resume")
            else:
                kt = "n/a" if report.kt_mean is None else f"{report.kt_mean:.4f}"
                print(f"epochs {len(model.history_)}  valid KT {kt}  PMR {report.pmr:.4f}  PA {report.pa:.4f}")
        elif args.command == "eval":
            report = cmd_eval(args.checkpoint, args.split, args.out, cfg.seed,
                              cfg.model if args.check_model else None)
            kt = "n/a" if report.kt_mean is None else f"{report.kt_mean:.4f}"
            print(f"KT {kt}  PMR {report.pmr:.4f}  PA {report.pa:.4f}  ({report.count} documents)")
    except (ValueError, OSError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
