"""Estimator base class shared by every ordering model.

Subclasses implement ``_init_params``, ``_batch_loss`` and ``_decode``; this
class owns embeddings, the Adam training loop with validation-KT early
stopping, resumable training state, checkpoint I/O and scoring.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import checkpoint as ckpt
from .autograd import Tensor, no_grad
from .corpus import (
    Document,
    EmbeddingTable,
    Sentence,
    ShuffledInstance,
    derive_seed,
    embed_batch,
    shuffle_document,
)
from ._validation import check_documents, check_instances
from .metrics import MetricsReport, evaluate
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


@dataclass
class TrainState:
    """Everything needed to continue training bit-identically after an interruption."""

    epoch: int = 0
    best_kt: float = -np.inf
    bad_epochs: int = 0
    done: bool = False
    history: list[tuple[int, float, float]] = field(default_factory=list)
    best_params: dict[str, np.ndarray] = field(default_factory=dict)


def instance_for(doc: Document, seed: int, tag: str = "eval") -> ShuffledInstance:
    return shuffle_document(doc, derive_seed(seed, tag, doc.id))


def predicted_positions(instance: ShuffledInstance, order: Sequence[int]) -> list[int]:
    """Gold positions of the sentences in decoded order (identity when perfect)."""
    return [instance.perm[k] for k in order]


def holdout_split(docs: list[Document], fraction: float, seed: int) -> tuple[list[Document], list[Document]]:
    if len(docs) < 2:
        return docs, docs
    keyed = sorted(docs, key=lambda d: derive_seed(seed, "holdout", d.id))
    n_valid = max(1, int(round(fraction * len(docs))))
    valid_ids = {d.id for d in keyed[:n_valid]}
    return [d for d in docs if d.id not in valid_ids], [d for d in docs if d.id in valid_ids]


class BaseOrderer(BaseEstimator):
    """Shared fit/predict/score machinery; not usable on its own."""

    model_kind = "base"

    # -- hooks ------------------------------------------------------------------
    def _init_params(self, docs: list[Document], rng: np.random.Generator) -> dict[str, Tensor]:
        raise NotImplementedError

    def _batch_loss(self, instances: list[ShuffledInstance], rng: np.random.Generator) -> Tensor:
        raise NotImplementedError

    def _decode(self, instance: ShuffledInstance) -> list[int]:
        raise NotImplementedError

    def _decode_many(self, instances: list[ShuffledInstance]) -> list[list[int]]:
        return [self._decode(i) for i in instances]

    def _decode_all(self, instances: list[ShuffledInstance], chunk: int = 256) -> list[list[int]]:
        out: list[list[int]] = []
        for lo in range(0, len(instances), chunk):
            out.extend(self._decode_many(instances[lo : lo + chunk]))
        return out

    def _extra_meta(self) -> dict:
        return {}

    def _load_extra_meta(self, meta: dict) -> None:
        pass

    # -- embeddings -------------------------------------------------------------
    def _uses_embeddings(self) -> bool:
        return True

    def _setup_embeddings(self, docs: list[Document]) -> None:
        if not self._uses_embeddings():
            self.embeddings_ = None
            return
        if self.embeddings is not None:
            self.embeddings_ = self.embeddings
        else:
            tokens = {tok for d in docs for s in d.sentences for tok in s.tokens}
            self.embeddings_ = EmbeddingTable.random(
                tokens, self.embedding_dim, seed=derive_seed(self.random_state, "embeddings"),
                oov_policy=self.oov_policy,
            )
        self._emb_cache = {}

    def _embed(self, sentences: Sequence[Sentence]) -> tuple[np.ndarray, np.ndarray]:
        cache = self.__dict__.setdefault("_emb_cache", {})
        width = min(self.max_len, max(len(s) for s in sentences))
        out = np.zeros((len(sentences), width, self.embeddings_.dim))
        lengths = np.empty(len(sentences), dtype=np.int64)
        for i, s in enumerate(sentences):
            rows = cache.get(s)
            if rows is None:
                rows, _ = embed_batch([s], self.embeddings_, self.max_len)
                rows = cache[s] = rows[0]
            out[i, : rows.shape[0]] = rows
            lengths[i] = rows.shape[0]
        return out, lengths

    # -- fitting ----------------------------------------------------------------
    def _adam(self) -> AdamState:
        return AdamState(lr=self.lr, weight_decay=self.weight_decay)

    def initialize(self, X: Sequence[Document]) -> "BaseOrderer":
        """Build embeddings and freshly initialised parameters without training."""
        docs = check_documents(X)
        self._setup_embeddings(docs)
        self.max_paragraph_len_ = max(len(d) for d in docs)
        rng = np.random.default_rng(derive_seed(self.random_state, "init"))
        self.params_ = self._init_params(docs, rng)
        self.adam_ = self._adam()
        self.train_state_ = TrainState()
        self.history_ = []
        self.best_params_ = {}
        return self

    def fit(
        self,
        X: Sequence[Document],
        y=None,
        X_valid: Sequence[Document] | None = None,
        on_epoch: Callable[["BaseOrderer"], None] | None = None,
    ) -> "BaseOrderer":
        """Train on gold-ordered documents; ``y`` is ignored (targets come from the order)."""
        docs = check_documents(X)
        if X_valid is None:
            docs, valid = holdout_split(docs, self.validation_fraction, self.random_state)
        else:
            valid = check_documents(X_valid, "X_valid")
        self.initialize(docs)
        return self.continue_fit(docs, valid, on_epoch=on_epoch)

    def continue_fit(
        self,
        docs: Sequence[Document],
        valid: Sequence[Document],
        on_epoch: Callable[["BaseOrderer"], None] | None = None,
    ) -> "BaseOrderer":
        """Run (or resume) the epoch loop from ``self.train_state_``."""
        check_is_fitted(self, "params_")
        docs = check_documents(docs)
        valid = check_documents(valid, "valid")
        state = self.train_state_
        seed = self.random_state
        names = sorted(self.params_)
        params = {k: self.params_[k] for k in names}
        valid_instances = [instance_for(d, seed, "valid") for d in valid]
        batch = min(self.batch_docs, len(docs))

        while not state.done and state.epoch < self.epochs:
            epoch = state.epoch
            losses = []
            for step in range(self.steps_per_epoch):
                rng = np.random.default_rng(derive_seed(seed, "step", epoch, step))
                picks = rng.choice(len(docs), size=batch, replace=False)
                instances = [
                    shuffle_document(docs[i], derive_seed(seed, "shuffle", epoch, step, int(i)))
                    for i in picks
                ]
                loss = self._batch_loss(instances, rng)
                loss.backward(params=params.values())
                adam_step(params, self.adam_)
                losses.append(loss.item())
            valid_kt = self._mean_kt(valid_instances)
            train_loss = float(np.mean(losses)) if losses else float("nan")
            state.epoch += 1
            state.history.append((state.epoch, train_loss, valid_kt))
            if valid_kt > state.best_kt:
                state.best_kt = valid_kt
                state.bad_epochs = 0
                state.best_params = {k: p.data.copy() for k, p in params.items()}
            else:
                state.bad_epochs += 1
                if state.bad_epochs > self.patience:
                    state.done = True
            if self.verbose:
                logger.info("epoch %d loss %.6f valid_kt %.4f", state.epoch, train_loss, valid_kt)
            if on_epoch is not None:
                on_epoch(self)
        state.done = True
        self.history_ = list(state.history)
        self.best_params_ = {k: v.copy() for k, v in state.best_params.items()}
        return self

    # -- inference --------------------------------------------------------------
    def _as_instances(self, X) -> list[ShuffledInstance]:
        X = list(X)
        if X and isinstance(X[0], Document):
            return [instance_for(d, self.random_state) for d in X]
        return check_instances(X)

    def _with_best(self):
        return _BestParams(self)

    def predict(self, X) -> list[list[int]]:
        """Decoded orderings: shuffled indices listed in predicted order.

        Documents are shuffled deterministically from ``random_state`` first.
        """
        check_is_fitted(self, "params_")
        instances = self._as_instances(X)
        with no_grad(), self._with_best():
            return self._decode_all(instances)

    def _mean_kt(self, instances: list[ShuffledInstance]) -> float:
        with no_grad():
            orders = self._decode_all(instances)
        preds = [predicted_positions(i, o) for i, o in zip(instances, orders)]
        report = evaluate(preds, [list(range(len(i))) for i in instances])
        return report.kt_mean if report.kt_mean is not None else 1.0

    def evaluate(self, X) -> MetricsReport:
        instances = self._as_instances(X)
        orders = self.predict(instances)
        preds = [predicted_positions(i, o) for i, o in zip(instances, orders)]
        return evaluate(preds, [list(range(len(i))) for i in instances])

    def score(self, X, y=None) -> float:
        """Mean Kendall tau over documents with at least two sentences."""
        report = self.evaluate(X)
        return report.kt_mean if report.kt_mean is not None else 1.0

    # -- persistence ------------------------------------------------------------
    def _meta(self) -> dict:
        params = self.get_params()
        params.pop("embeddings", None)
        return {
            "model_kind": self.model_kind,
            "estimator": params,
            "max_paragraph_len": self.max_paragraph_len_,
            "embeddings": None if self.embeddings_ is None else self.embeddings_.to_dict(),
            **self._extra_meta(),
        }

    def _tensors(self, which: str = "best") -> dict[str, np.ndarray]:
        if which == "best" and getattr(self, "best_params_", None):
            out = {f"param.{k}": v for k, v in self.best_params_.items()}
        else:
            out = {f"param.{k}": p.data for k, p in self.params_.items()}
        if self.embeddings_ is not None:
            out["embeddings"] = self.embeddings_.matrix()
        return out

    def save(self, path) -> None:
        """Write the best-validation parameters as a model checkpoint."""
        check_is_fitted(self, "params_")
        ckpt.save_checkpoint(path, self._tensors("best"), self._meta())

    def save_training_state(self, path) -> None:
        """Write current parameters, Adam moments and loop state for resuming."""
        state = self.train_state_
        tensors = self._tensors("current")
        for k, v in self.adam_.m.items():
            tensors[f"adam.m.{k}"] = v
            tensors[f"adam.v.{k}"] = self.adam_.v[k]
        for k, v in state.best_params.items():
            tensors[f"best.{k}"] = v
        meta = self._meta()
        meta["train_state"] = {
            "epoch": state.epoch,
            "best_kt": None if not np.isfinite(state.best_kt) else state.best_kt,
            "bad_epochs": state.bad_epochs,
            "done": state.done,
            "history": [list(h) for h in state.history],
            "adam": self.adam_.to_dict(),
        }
        ckpt.save_checkpoint(path, tensors, meta)

    @classmethod
    def _restore(cls, tensors: dict[str, np.ndarray], meta: dict) -> "BaseOrderer":
        model = cls(**meta["estimator"])
        if meta.get("embeddings") is not None:
            model.embeddings_ = EmbeddingTable.from_arrays(meta["embeddings"], tensors["embeddings"])
        else:
            model.embeddings_ = None
        model._emb_cache = {}
        model.max_paragraph_len_ = meta["max_paragraph_len"]
        model._load_extra_meta(meta)
        model.params_ = {
            k[len("param."):]: Tensor(v, requires_grad=True, name=k[len("param."):])
            for k, v in tensors.items()
            if k.startswith("param.")
        }
        model.best_params_ = {k: p.data.copy() for k, p in model.params_.items()}
        model.adam_ = model._adam()
        model.train_state_ = TrainState(done=True)
        model.history_ = []
        ts = meta.get("train_state")
        if ts is not None:
            adam = ts["adam"]
            model.adam_ = AdamState(**adam)
            for k, v in tensors.items():
                if k.startswith("adam.m."):
                    model.adam_.m[k[len("adam.m."):]] = v.copy()
                elif k.startswith("adam.v."):
                    model.adam_.v[k[len("adam.v."):]] = v.copy()
            model.train_state_ = TrainState(
                epoch=ts["epoch"],
                best_kt=-np.inf if ts["best_kt"] is None else ts["best_kt"],
                bad_epochs=ts["bad_epochs"],
                done=ts["done"],
                history=[tuple(h) for h in ts["history"]],
                best_params={k[len("best."):]: v.copy() for k, v in tensors.items() if k.startswith("best.")},
            )
            model.history_ = list(model.train_state_.history)
            model.best_params_ = {k: v.copy() for k, v in model.train_state_.best_params.items()}
        return model


class _BestParams:
    """Temporarily swap the best-validation weights in for inference."""

    def __init__(self, model: BaseOrderer):
        self.model = model
        self.saved = None

    def __enter__(self):
        best = getattr(self.model, "best_params_", None)
        if best:
            self.saved = {k: p.data for k, p in self.model.params_.items()}
            for k, p in self.model.params_.items():
                p.data = best[k]
        return self

    def __exit__(self, *exc):
        if self.saved is not None:
            for k, p in self.model.params_.items():
                p.data = self.saved[k]
        return False


def load_model(path) -> BaseOrderer:
    """Rebuild whichever estimator wrote ``path``."""
    from .firstnext import FirstNextOrderer
    from .pairwise import PairwiseOrderer
    from .regression import RegressionOrderer

    tensors, meta = ckpt.load_checkpoint(path)
    kinds = {cls.model_kind: cls for cls in (RegressionOrderer, PairwiseOrderer, FirstNextOrderer)}
    cls = kinds.get(meta.get("model_kind"))
    if cls is None:
        raise ckpt.CheckpointError(f"{path}: unknown model kind {meta.get('model_kind')!r}")
    return cls._restore(tensors, meta)
