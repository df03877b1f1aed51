"""End-to-end acceptance criteria.

Every test records a one-line verdict in ``RESULTS``; ``conftest.py`` prints
them as a PASS/FAIL block at the end of the run.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import brute_kendall_tau, brute_pa, brute_pmr
from sentorder.autograd import Tensor, grad_check
from sentorder.base import instance_for
from sentorder.cli import main, split_documents
from sentorder.corpus import SyntheticSpec, generate_synthetic_corpus
from sentorder.encoders import EncoderConfig, encode_sentences, init_encoder, init_mlp, mlp
from sentorder.firstnext import FirstNextOrderer
from sentorder.metrics import kendall_tau, pmr, positional_accuracy
from sentorder.pairwise import PairwiseOrderer, decode_beam, decode_exhaustive
from sentorder.regression import RegressionOrderer, decode_argsort, gold_targets

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    RESULTS[criterion] = (bool(ok), detail)
    assert ok, detail


def seconds_since(start: float) -> float:
    return time.perf_counter() - start


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_metric_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    preds, golds = [], []
    for _ in range(1000):
        n = int(rng.integers(2, 11))
        pred, gold = rng.permutation(n).tolist(), rng.permutation(n).tolist()
        worst = max(
            worst,
            abs(kendall_tau(pred, gold) - brute_kendall_tau(pred, gold)),
            abs(pmr([pred], [gold]) - brute_pmr([pred], [gold])),
            abs(positional_accuracy([pred], [gold]) - brute_pa([pred], [gold])),
        )
        preds.append(pred)
        golds.append(gold)
    worst = max(
        worst,
        abs(pmr(preds, golds) - brute_pmr(preds, golds)),
        abs(positional_accuracy(preds, golds) - brute_pa(preds, golds)),
    )
    extremes_ok = all(
        kendall_tau(p, p) == 1.0 and kendall_tau(p[::-1], p) == -1.0
        for n in range(2, 9)
        for p in itertools.permutations(range(n))
    )
    elapsed = seconds_since(start)
    ok = worst <= 1e-12 and extremes_ok and elapsed < 10
    record(1, ok, f"max |diff| {worst:.1e}, identity/reverse exhaustive n<=8 {extremes_ok}, {elapsed:.1f}s")


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_mean_kendall_tau_is_zero():
    start = time.perf_counter()
    sums = {}
    for n in range(2, 7):
        gold = list(range(n))
        sums[n] = sum(Fraction(kendall_tau(p, gold)) for p in itertools.permutations(gold))
    elapsed = seconds_since(start)
    ok = all(s == 0 for s in sums.values()) and elapsed < 10
    record(2, ok, f"exact sums {[str(s) for s in sums.values()]} for n=2..6, {elapsed:.1f}s")


# -- 3 -------------------------------------------------------------------------

def tiny_corpus(seed):
    spec = SyntheticSpec(num_docs=6, len_range=(2, 4), filler_range=(1, 2), context_signal=True)
    return generate_synthetic_corpus(spec, seed=seed)


SMALL_DIMS = dict(embedding_dim=3, feature_maps=3, hidden_size=3, context_dim=3)


def model_loss_check(model, seed):
    docs = tiny_corpus(seed)
    model.set_params(random_state=seed).initialize(docs)
    instances = [instance_for(d, seed) for d in docs[:2]]
    params = [model.params_[k] for k in sorted(model.params_)]
    # perturb the learned start vector away from zero so its check is meaningful
    if "start" in model.params_:
        model.params_["start"].data[:] = np.random.default_rng(seed).normal(scale=0.5, size=3)
    return grad_check(lambda: model._batch_loss(instances, np.random.default_rng(seed)), params)


def encoder_check(kind, seed):
    rng = np.random.default_rng(seed)
    cfg = EncoderConfig(kind, d=4, d_f=5, l_f=3, h=4)
    params = init_encoder(cfg, rng)
    params.update(init_mlp(cfg.output_dim, 4, rng, "head"))
    x = Tensor(rng.normal(size=(3, 5, 4)), requires_grad=True, name="x")
    lengths = [5, 3, 1]
    return grad_check(lambda: mlp(encode_sentences(cfg, x, lengths, params), params).sum(), [x, *params.values()])


def test_criterion_3_gradient_checks():
    start = time.perf_counter()
    builders = {
        "pairwise head": lambda: PairwiseOrderer(encoder="cnn", **{k: v for k, v in SMALL_DIMS.items() if k != "context_dim"}),
        "first-next head": lambda: FirstNextOrderer(encoder="cnn", **SMALL_DIMS),
        "context regression": lambda: RegressionOrderer(encoder="lstm", use_context=True, **SMALL_DIMS),
    }
    worst: dict[str, float] = {}
    for seed in range(20):
        for kind in ("cbow", "cnn", "lstm"):
            r = encoder_check(kind, seed)
            worst[kind] = max(worst.get(kind, 0.0), r["max_rel_error"])
        for name, build in builders.items():
            r = model_loss_check(build(), seed)
            worst[name] = max(worst.get(name, 0.0), r["max_rel_error"])
    elapsed = seconds_since(start)
    ok = all(v < 1e-4 for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(3, ok, f"max rel error over 20 seeds: {detail}; {elapsed:.1f}s")


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_beam_equals_exhaustive():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    mismatches = tables = 0
    for n in range(1, 6):
        for trial in range(100):
            if trial % 2:
                table = rng.normal(size=(n, n))
            else:
                table = rng.integers(-1, 2, size=(n, n)).astype(float)
            np.fill_diagonal(table, -np.inf)
            for mode in ("adjacent-pairs", "all-pairs"):
                tables += 1
                mismatches += decode_beam(table, math.factorial(n), mode) != decode_exhaustive(table, mode)
    elapsed = seconds_since(start)
    ok = mismatches == 0 and elapsed < 60
    record(4, ok, f"{mismatches} mismatches over {tables} tables (half with ties), {elapsed:.1f}s")


# -- 5 -------------------------------------------------------------------------

def test_criterion_5_argsort_inverts_gold_targets():
    start = time.perf_counter()
    failures = checked = 0
    for n in range(1, 9):
        targets = gold_targets(n)
        for perm in itertools.permutations(range(n)):
            order = decode_argsort(targets[list(perm)])
            failures += [perm[k] for k in order] != list(range(n))
            checked += 1
    elapsed = seconds_since(start)
    ok = failures == 0 and elapsed < 30
    record(5, ok, f"{failures} failures over {checked} permutations (n<=8), {elapsed:.1f}s")


# -- 6 -------------------------------------------------------------------------

LEARN = dict(epochs=30, lr=1e-3, random_state=0)
# pointwise filters; width-3 windows memorize filler trigrams on this corpus
LEARN_CNN_FILTER = 1


def test_criterion_6_learnability():
    start = time.perf_counter()
    docs = generate_synthetic_corpus(SyntheticSpec(num_docs=2000, len_range=(2, 8), positional_signal=True), seed=0)
    train, valid, test = split_documents(docs, (0.8, 0.1, 0.1), seed=0)
    models = {
        "bow": RegressionOrderer(encoder="bow", **LEARN),
        "cnn": RegressionOrderer(encoder="cnn", filter_length=LEARN_CNN_FILTER, **LEARN),
        "lstm": RegressionOrderer(encoder="lstm", **LEARN),
    }
    reports = {name: model.fit(train, X_valid=valid).evaluate(test) for name, model in models.items()}
    elapsed = seconds_since(start)
    ok = (
        reports["bow"].kt_mean >= 0.9
        and all(reports[e].kt_mean >= 0.95 and reports[e].pmr >= 0.85 for e in ("cnn", "lstm"))
        and elapsed < 600
    )
    detail = "; ".join(f"{e} KT {r.kt_mean:.3f} PMR {r.pmr:.3f}" for e, r in reports.items())
    # reported for reference, not part of the verdict
    wide = RegressionOrderer(encoder="cnn", filter_length=3, **LEARN).fit(train, X_valid=valid).evaluate(test)
    detail += f"; (cnn filter 3: KT {wide.kt_mean:.3f} PMR {wide.pmr:.3f})"
    record(6, ok, f"{detail}; {elapsed:.0f}s")


# -- 7 -------------------------------------------------------------------------

CONTEXT_SEEDS = (0, 1, 2)
CONTEXT_EPOCHS = 20


def test_criterion_7_model_ordering_on_context_corpus():
    start = time.perf_counter()
    kts: dict[str, list[float]] = {"context": [], "firstnext": [], "pairwise": [], "plain": []}
    for seed in CONTEXT_SEEDS:
        spec = SyntheticSpec(num_docs=2000, len_range=(2, 8), positional_signal=False, context_signal=True)
        docs = generate_synthetic_corpus(spec, seed=seed)
        train, valid, test = split_documents(docs, (0.8, 0.1, 0.1), seed=seed)
        common = dict(epochs=CONTEXT_EPOCHS, lr=3e-3, random_state=seed)
        models = {
            "context": RegressionOrderer(encoder="lstm", use_context=True, **common),
            "firstnext": FirstNextOrderer(**common),
            "pairwise": PairwiseOrderer(**common),
            "plain": RegressionOrderer(encoder="lstm", **common),
        }
        for name, model in models.items():
            kts[name].append(model.fit(train, X_valid=valid).score(test))
    elapsed = seconds_since(start)
    mean = {k: float(np.mean(v)) for k, v in kts.items()}
    gaps = {
        "context-firstnext": mean["context"] - mean["firstnext"],
        "firstnext-pairwise": mean["firstnext"] - mean["pairwise"],
        "context-plain": mean["context"] - mean["plain"],
    }
    ok = (
        gaps["context-firstnext"] >= 0
        and gaps["firstnext-pairwise"] >= 0
        and gaps["context-plain"] >= 0.05
        and elapsed < 1800
    )
    per_seed = ", ".join(f"{k} {[round(x, 3) for x in v]}" for k, v in kts.items())
    record(7, ok, f"mean gaps {', '.join(f'{k} {v:+.3f}' for k, v in gaps.items())}; per seed {per_seed}; {elapsed:.0f}s")


# -- 8 -------------------------------------------------------------------------

CROSSOVER_SEEDS = (0, 1, 2)
# pointwise filters keep single chain tokens visible to the pair classifier;
# chain learning is slow next to the markers, hence no early stopping
CROSSOVER_MODEL = dict(encoder="cnn", filter_length=1, epochs=40, patience=40, lr=3e-3)
CROSSOVER_SPEC = dict(
    num_docs=3000, len_range=(2, 10), positional_signal=True, marker_noise=0.4,
    transition_signal=True, link_noise=0.1,
)


def pooled_kt(report, lengths):
    buckets = [report.by_length[n] for n in lengths if n in report.by_length]
    return sum(b.kt_mean * b.count for b in buckets) / sum(b.count for b in buckets)


def test_criterion_8_crossover_by_length():
    start = time.perf_counter()
    short, long = (2, 3), (8, 9, 10)
    rows = []
    for seed in CROSSOVER_SEEDS:
        docs = generate_synthetic_corpus(SyntheticSpec(**CROSSOVER_SPEC), seed=seed)
        train, valid, test = docs[:1600], docs[1600:1800], docs[1800:]
        reg = RegressionOrderer(**CROSSOVER_MODEL, random_state=seed).fit(train, X_valid=valid).evaluate(test)
        pw = PairwiseOrderer(**CROSSOVER_MODEL, random_state=seed).fit(train, X_valid=valid).evaluate(test)
        rows.append({
            "short_gap": pooled_kt(pw, short) - pooled_kt(reg, short),
            "long_gap": pooled_kt(pw, long) - pooled_kt(reg, long),
        })
    elapsed = seconds_since(start)
    ok = all(r["short_gap"] >= 0 and r["long_gap"] < 0 for r in rows)
    detail = "; ".join(
        f"seed {s}: pw-reg at n<=3 {r['short_gap']:+.3f}, at n>=8 {r['long_gap']:+.3f}"
        for s, r in zip(CROSSOVER_SEEDS, rows)
    )
    record(8, ok, f"{detail}; {elapsed:.0f}s")


# -- 9 -------------------------------------------------------------------------

DETERMINISM_FLAGS = [
    "--embedding-dim", "6", "--feature-maps", "6", "--hidden-size", "6", "--context-dim", "6",
    "--epochs", "3", "--steps-per-epoch", "5", "--batch-docs", "8", "--seed", "11",
    "--vocab-unigrams", "40", "--vocab-bigrams", "20", "--vocab-trigrams", "10",
]
MODEL_KINDS = ("bow-linear", "cbow", "cnn", "lstm", "pairwise", "firstnext", "context-regression")


def train_and_eval(root, data, kind):
    out = root / kind
    assert main(["train", "--data", str(data), "--out", str(out / "train"), "--model", kind, *DETERMINISM_FLAGS]) == 0
    assert main([
        "eval", "--checkpoint", str(out / "train" / "model.json"), "--split", str(data / "test.jsonl"),
        "--out", str(out / "eval"), "--seed", "11",
    ]) == 0
    names = ["train/history.csv", "train/model.json", "eval/report.json", "eval/by_length.csv"]
    return {name: (out / name).read_bytes() for name in names}


def test_criterion_9_determinism(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["prepare", "--out", str(data), "--synthetic-num-docs", "120", "--seed", "11"]) == 0
    differing = []
    for kind in MODEL_KINDS:
        first = train_and_eval(tmp_path / "a", data, kind)
        second = train_and_eval(tmp_path / "b", data, kind)
        differing += [f"{kind}:{name}" for name in first if first[name] != second[name]]
    capsys.readouterr()
    ok = not differing
    record(9, ok, "all 7 model kinds bit-identical" if ok else f"differs: {differing}")
