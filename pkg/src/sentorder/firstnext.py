"""Selection-sort style ordering: repeatedly pick the sentence that comes next.

At step ``t`` each remaining candidate is scored from six pieces: its own
vector, the vectors of the last two chosen sentences (a learned start vector
stands in when fewer exist), the step index, the step as a fraction of the
paragraph, and an LSTM summary of the still-unplaced sentences in their
shuffled order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor, bce_loss, concat, no_grad
from .base import BaseOrderer
from .corpus import Document, ShuffledInstance, derive_seed
from .encoders import (
    EncoderConfig,
    encode_context,
    encode_sentences,
    init_context,
    init_encoder,
    init_mlp,
    mlp,
    zeros_param,
)


@dataclass
class DecodeState:
    n: int
    chosen: list[int] = field(default_factory=list)

    @property
    def remaining(self) -> list[int]:
        taken = set(self.chosen)
        return [k for k in range(self.n) if k not in taken]

    @property
    def t(self) -> int:
        return len(self.chosen)


@dataclass(frozen=True)
class FirstNextExample:
    chosen: tuple[int, ...]
    remaining: tuple[int, ...]
    candidate: int
    label: int


@dataclass
class FirstNextFeatures:
    candidate: np.ndarray
    prev1: np.ndarray
    prev2: np.ndarray
    offset: int
    offset_ratio: float
    right_ctx: np.ndarray

    def vector(self, max_paragraph_len: int) -> np.ndarray:
        return np.concatenate(
            [
                self.candidate,
                self.prev1,
                self.prev2,
                [self.offset / max_paragraph_len, self.offset_ratio],
                self.right_ctx,
            ]
        )


def offset_ratio(t: int, n: int) -> float:
    return t / (n - 1) if n > 1 else 0.0


def make_fn_examples(
    instance: ShuffledInstance | Document, seed: int = 0, negatives_per_positive: int = 1
) -> list[FirstNextExample]:
    """Teacher-forced examples along the gold prefix.

    For every ``t < n - 1`` the gold-next sentence is a positive and up to
    ``negatives_per_positive`` other remaining sentences are negatives.
    Indices refer to shuffled slots; a plain document counts as unshuffled.
    """
    if isinstance(instance, Document):
        instance = ShuffledInstance(instance.id, instance.sentences, tuple(range(len(instance))))
    return _examples(instance, np.random.default_rng(derive_seed(seed, "fn", instance.doc_id)), negatives_per_positive)


def _examples(instance: ShuffledInstance, rng: np.random.Generator, k: int) -> list[FirstNextExample]:
    n = len(instance)
    gold = instance.gold_order()
    out = []
    for t in range(n - 1):
        chosen = tuple(gold[:t])
        remaining = tuple(sorted(gold[t:]))
        out.append(FirstNextExample(chosen, remaining, gold[t], 1))
        wrong = [r for r in remaining if r != gold[t]]
        if wrong and k > 0:
            picks = rng.choice(len(wrong), size=min(k, len(wrong)), replace=False)
            for p in sorted(int(i) for i in picks):
                out.append(FirstNextExample(chosen, remaining, wrong[p], 0))
    return out


class FirstNextOrderer(BaseOrderer):
    """Greedy next-sentence selection conditioned on left and right context.

    Parameters
    ----------
    include_candidate_in_context : bool
        Whether the right-context encoding covers the candidate itself
        (the full remaining set) or the remaining set minus the candidate.
    negatives_per_positive : int
        Wrong candidates sampled per teacher-forced step.
    """

    model_kind = "firstnext"

    def __init__(
        self,
        encoder: str = "lstm",
        include_candidate_in_context: bool = True,
        negatives_per_positive: int = 1,
        embedding_dim: int = 16,
        feature_maps: int = 32,
        filter_length: int = 3,
        hidden_size: int = 32,
        context_dim: int = 32,
        cell_form: str = "standard",
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
        self.include_candidate_in_context = include_candidate_in_context
        self.negatives_per_positive = negatives_per_positive
        self.embedding_dim = embedding_dim
        self.feature_maps = feature_maps
        self.filter_length = filter_length
        self.hidden_size = hidden_size
        self.context_dim = context_dim
        self.cell_form = cell_form
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

    def _encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            kind=self.encoder,
            d=self.embeddings_.dim,
            d_f=self.feature_maps,
            l_f=self.filter_length,
            h=self.hidden_size,
            cell_form=self.cell_form,
        )

    @property
    def feature_width(self) -> int:
        return 3 * self._encoder_config().output_dim + 2 + self.context_dim

    def _init_params(self, docs, rng):
        cfg = self._encoder_config()
        params = init_encoder(cfg, rng, "enc")
        params.update(init_context(cfg.output_dim, self.context_dim, rng, "right"))
        params["start"] = zeros_param((cfg.output_dim,), "start")
        params.update(init_mlp(self.feature_width, self.hidden_size, rng, "head"))
        return params

    # -- feature assembly -------------------------------------------------------
    def _sentence_vectors(self, sentences) -> Tensor:
        x, lengths = self._embed(sentences)
        vecs = encode_sentences(self._encoder_config(), x, lengths, self.params_, "enc")
        return concat([vecs, self.params_["start"].reshape(1, -1)], axis=0)

    def _logits(self, vecs: Tensor, rows: list[tuple[int, tuple[int, ...], list[int], int, int]]) -> Tensor:
        """Score feature rows ``(candidate, chosen, context group, t, n)``.

        ``vecs`` holds sentence vectors followed by the start vector; context
        groups may be empty, in which case the start row stands in.
        """
        start_row = vecs.shape[0] - 1
        cand = np.array([r[0] for r in rows])
        prev1 = np.array([r[1][-1] if len(r[1]) >= 1 else start_row for r in rows])
        prev2 = np.array([r[1][-2] if len(r[1]) >= 2 else start_row for r in rows])
        scalars = np.array(
            [[r[3] / self.max_paragraph_len_, offset_ratio(r[3], r[4])] for r in rows]
        )
        groups: list[list[int]] = []
        group_index: dict[tuple[int, ...], int] = {}
        ctx_rows = []
        for r in rows:
            key = tuple(r[2]) if r[2] else (start_row,)
            if key not in group_index:
                group_index[key] = len(groups)
                groups.append(list(key))
            ctx_rows.append(group_index[key])
        ctx = encode_context(vecs, groups, self.params_, "right", "lstm", self.cell_form)
        feats = concat(
            [vecs[cand], vecs[prev1], vecs[prev2], Tensor(scalars), ctx[np.array(ctx_rows)]],
            axis=1,
        )
        return mlp(feats, self.params_, "head")

    def _context_group(self, remaining, candidate: int, offset: int) -> list[int]:
        if self.include_candidate_in_context:
            return [offset + r for r in remaining]
        return [offset + r for r in remaining if r != candidate]

    def assemble_features(self, instance: ShuffledInstance, state: DecodeState, candidate: int) -> FirstNextFeatures:
        """Feature pieces for scoring ``candidate`` in ``state`` (inspection helper)."""
        if candidate not in state.remaining:
            raise ValueError(f"candidate {candidate} is not among the remaining sentences")
        with no_grad(), self._with_best():
            vecs = self._sentence_vectors(instance.shuffled)
            start = vecs.data[-1]
            group = self._context_group(state.remaining, candidate, 0) or [vecs.shape[0] - 1]
            ctx = encode_context(vecs, [group], self.params_, "right", "lstm", self.cell_form).data[0]
            n = len(instance)
            chosen = state.chosen
            return FirstNextFeatures(
                candidate=vecs.data[candidate].copy(),
                prev1=(vecs.data[chosen[-1]] if len(chosen) >= 1 else start).copy(),
                prev2=(vecs.data[chosen[-2]] if len(chosen) >= 2 else start).copy(),
                offset=state.t,
                offset_ratio=offset_ratio(state.t, n),
                right_ctx=ctx.copy(),
            )

    # -- training ---------------------------------------------------------------
    def _batch_loss(self, instances, rng):
        sentences, rows, labels = [], [], []
        for inst in instances:
            base = len(sentences)
            sentences.extend(inst.shuffled)
            for ex in _examples(inst, rng, self.negatives_per_positive):
                rows.append(
                    (
                        base + ex.candidate,
                        tuple(base + c for c in ex.chosen),
                        self._context_group(ex.remaining, ex.candidate, base),
                        len(ex.chosen),
                        len(inst),
                    )
                )
                labels.append(ex.label)
        if not rows:
            return Tensor(0.0)
        vecs = self._sentence_vectors(sentences)
        return bce_loss(self._logits(vecs, rows), np.array(labels, dtype=np.float64))

    # -- decoding ---------------------------------------------------------------
    def _decode(self, instance: ShuffledInstance) -> list[int]:
        n = len(instance)
        if n == 1:
            return [0]
        vecs = self._sentence_vectors(instance.shuffled)
        state = DecodeState(n)
        while state.t < n:
            remaining = state.remaining
            if len(remaining) == 1:
                state.chosen.append(remaining[0])
                break
            rows = [
                (c, tuple(state.chosen), self._context_group(remaining, c, 0), state.t, n)
                for c in remaining
            ]
            logits = self._logits(vecs, rows).data
            state.chosen.append(remaining[int(np.argmax(logits))])
        return state.chosen

    def decode_with_scorer(self, instance: ShuffledInstance, scorer) -> list[int]:
        """Greedy decoding with an arbitrary ``scorer(state, candidate) -> float``."""
        return greedy_decode(len(instance), scorer)


def greedy_decode(n: int, scorer) -> list[int]:
    """Pick the best-scoring remaining index at every step; ties go to the smallest index."""
    state = DecodeState(n)
    while state.t < n:
        remaining = state.remaining
        scores = [scorer(state, c) for c in remaining]
        state.chosen.append(remaining[int(np.argmax(scores))])
    return state.chosen
