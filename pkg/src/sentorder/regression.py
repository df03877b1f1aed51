"""Ordering by regression: each sentence gets a scalar key and sentences are sorted by it."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autograd import Tensor, concat, matmul, mse_loss, no_grad
from .base import BaseOrderer
from .corpus import Document, ShuffledInstance, Vocabulary, bow_matrix, build_vocab
from .encoders import (
    EncoderConfig,
    encode_context,
    encode_sentences,
    init_context,
    init_encoder,
    init_mlp,
    mlp,
    uniform_init,
)

REGRESSION_ENCODERS = ("bow", "cbow", "cnn", "lstm")


def gold_targets(n: int) -> np.ndarray:
    """Evenly spaced targets on [-1, 1], endpoints included; ``[0.0]`` when ``n == 1``."""
    if n < 1:
        raise ValueError("gold_targets needs n >= 1")
    if n == 1:
        return np.zeros(1)
    return -1.0 + 2.0 * np.arange(n) / (n - 1)


def decode_argsort(scores: Sequence[float]) -> list[int]:
    """Indices in ascending score order; equal scores keep their original order."""
    return [int(i) for i in np.argsort(np.asarray(scores, dtype=np.float64), kind="stable")]


def instance_targets(instance: ShuffledInstance) -> np.ndarray:
    return gold_targets(len(instance))[list(instance.perm)]


class RegressionOrderer(BaseOrderer):
    """Scores sentences independently (or with paragraph context) and sorts the scores.

    Parameters
    ----------
    encoder : {"bow", "cbow", "cnn", "lstm"}
        ``"bow"`` is a linear model over n-gram counts; the others embed
        words and feed a sentence encoding to a two-layer tanh head.
    use_context : bool
        Concatenate an encoding of the whole shuffled paragraph and the
        normalised sentence count to every sentence vector.
    share_context_encoder : bool
        Reuse the sentence encoder for the context path instead of a
        separately parameterised one.
    context_pooling : {"lstm", "mean"}
        ``"mean"`` is an order-invariant alternative to the context LSTM.
    """

    model_kind = "regression"

    def __init__(
        self,
        encoder: str = "lstm",
        use_context: bool = False,
        embedding_dim: int = 16,
        feature_maps: int = 32,
        filter_length: int = 3,
        hidden_size: int = 32,
        context_dim: int = 32,
        context_pooling: str = "lstm",
        share_context_encoder: bool = False,
        cell_form: str = "standard",
        vocab_sizes: tuple[int, int, int] = (3000, 2000, 1000),
        max_len: int = 64,
        epochs: int = 30,
        steps_per_epoch: int = 100,
        batch_docs: int = 16,
        patience: int = 10,
        lr: float = 1e-3,
        weight_decay: float = 1e-4,
        validation_fraction: float = 0.1,
        embeddings=None,
        oov_policy: str = "zeros",
        random_state: int = 0,
        verbose: int = 0,
    ):
        self.encoder = encoder
        self.use_context = use_context
        self.embedding_dim = embedding_dim
        self.feature_maps = feature_maps
        self.filter_length = filter_length
        self.hidden_size = hidden_size
        self.context_dim = context_dim
        self.context_pooling = context_pooling
        self.share_context_encoder = share_context_encoder
        self.cell_form = cell_form
        self.vocab_sizes = vocab_sizes
        self.max_len = max_len
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.batch_docs = batch_docs
        self.patience = patience
        self.lr = lr
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.embeddings = embeddings
        self.oov_policy = oov_policy
        self.random_state = random_state
        self.verbose = verbose

    # -- configuration ----------------------------------------------------------
    def _encoder_config(self) -> EncoderConfig:
        dim = self.embeddings_.dim if getattr(self, "embeddings_", None) is not None else self.embedding_dim
        return EncoderConfig(
            kind=self.encoder,
            d=dim,
            d_f=self.feature_maps,
            l_f=self.filter_length,
            h=self.hidden_size,
            cell_form=self.cell_form,
        )

    def _uses_embeddings(self) -> bool:
        if self.encoder not in REGRESSION_ENCODERS:
            raise ValueError(f"encoder must be one of {REGRESSION_ENCODERS}, got {self.encoder!r}")
        return self.encoder != "bow"

    def _init_params(self, docs: list[Document], rng: np.random.Generator):
        if self.encoder == "bow":
            if self.use_context:
                raise ValueError("the bag-of-words model has no context variant")
            self.vocab_ = build_vocab(docs, tuple(self.vocab_sizes))
            width = max(len(self.vocab_), 1)
            return {
                "linear.W": uniform_init(rng, (width, 1), width, "linear.W"),
                "linear.b": uniform_init(rng, (1,), width, "linear.b"),
            }
        cfg = self._encoder_config()
        params = init_encoder(cfg, rng, "enc")
        width = cfg.output_dim
        if self.use_context:
            if not self.share_context_encoder:
                params.update(init_encoder(cfg, rng, "ctxenc"))
            params.update(init_context(cfg.output_dim, self.context_dim, rng, "ctx", self.context_pooling))
            width += self.context_dim + 1
        params.update(init_mlp(width, self.hidden_size, rng, "head"))
        return params

    def _extra_meta(self) -> dict:
        return {"vocab": self.vocab_.to_dict()} if self.encoder == "bow" else {}

    def _load_extra_meta(self, meta: dict) -> None:
        if "vocab" in meta:
            self.vocab_ = Vocabulary.from_dict(meta["vocab"])

    # -- forward ----------------------------------------------------------------
    def _scores(self, instances: list[ShuffledInstance]) -> Tensor:
        """Concatenated scores for every shuffled sentence of every instance."""
        sentences = [s for inst in instances for s in inst.shuffled]
        p = self.params_
        if self.encoder == "bow":
            feats = bow_matrix(sentences, self.vocab_)
            if feats.shape[1] == 0:
                feats = np.zeros((len(sentences), 1))
            out = matmul(Tensor(feats), p["linear.W"]) + p["linear.b"]
            return out.reshape(len(sentences))
        cfg = self._encoder_config()
        x, lengths = self._embed(sentences)
        vecs = encode_sentences(cfg, x, lengths, p, "enc")
        if self.use_context:
            ctx_vecs = vecs if self.share_context_encoder else encode_sentences(cfg, x, lengths, p, "ctxenc")
            groups, owner, counts = [], [], []
            start = 0
            for d, inst in enumerate(instances):
                groups.append(list(range(start, start + len(inst))))
                owner.extend([d] * len(inst))
                counts.extend([len(inst) / self.max_paragraph_len_] * len(inst))
                start += len(inst)
            ctx = encode_context(ctx_vecs, groups, p, "ctx", self.context_pooling, self.cell_form)
            vecs = concat([vecs, ctx[np.array(owner)], Tensor(np.array(counts)[:, None])], axis=1)
        return mlp(vecs, p, "head")

    def _batch_loss(self, instances, rng):
        target = np.concatenate([instance_targets(i) for i in instances])
        return mse_loss(self._scores(instances), target)

    def predict_scores(self, instance: ShuffledInstance) -> np.ndarray:
        """One regression value per shuffled sentence."""
        with no_grad(), self._with_best():
            return self._scores([instance]).data.copy()

    def _decode(self, instance: ShuffledInstance) -> list[int]:
        return decode_argsort(self._scores([instance]).data)

    def _decode_many(self, instances: list[ShuffledInstance]) -> list[list[int]]:
        scores = self._scores(instances).data
        out, start = [], 0
        for inst in instances:
            out.append(decode_argsort(scores[start : start + len(inst)]))
            start += len(inst)
        return out


def fit_bow_linear(train: Sequence[Document], vocab_sizes=(3000, 2000, 1000), **kwargs) -> RegressionOrderer:
    """Bag-of-n-grams linear regression trained by the shared Adam loop."""
    if not train:
        raise ValueError("fit_bow_linear needs a non-empty corpus")
    return RegressionOrderer(encoder="bow", vocab_sizes=vocab_sizes, **kwargs).fit(train)
