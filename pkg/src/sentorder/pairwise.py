"""Pairwise next-sentence ranking with exhaustive and beam-search decoding.

Decoders work on a transition table ``T`` where ``T[a, b]`` is the score
(log-probability) of sentence ``a`` immediately preceding ``b``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autograd import Tensor, bce_loss, concat, log_sigmoid, no_grad
from .base import BaseOrderer
from .corpus import Document, Sentence, ShuffledInstance, derive_seed
from .encoders import EncoderConfig, encode_sentences, init_encoder, init_mlp, mlp
from ._validation import check_permutation

PAIR_MODES = ("adjacent", "random_negative")
SCORE_MODES = ("adjacent-pairs", "all-pairs")


@dataclass(frozen=True)
class PairExample:
    left: Sentence
    right: Sentence
    label: int


def pair_indices(n: int, mode: str, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """``(left gold position, right gold position, label)`` triples for one document."""
    if mode not in PAIR_MODES:
        raise ValueError(f"pair mode must be one of {PAIR_MODES}, got {mode!r}")
    out = []
    for i in range(n - 1):
        out.append((i, i + 1, 1))
        if mode == "adjacent":
            out.append((i + 1, i, 0))
        else:
            wrong = [j for j in range(n) if j != i and j != i + 1]
            if wrong:
                out.append((i, int(rng.choice(wrong)), 0))
            else:
                out.append((i + 1, i, 0))
    return out


def make_pairs(doc: Document, mode: str = "adjacent", seed: int = 0) -> list[PairExample]:
    """Positive gold-adjacent pairs, each with one negative.

    ``adjacent`` negatives reverse the pair. ``random_negative`` pairs the
    left sentence with a uniformly drawn sentence other than itself and its
    successor; two-sentence documents fall back to the reversed pair.
    """
    rng = np.random.default_rng(derive_seed(seed, "pairs", doc.id))
    s = doc.sentences
    return [PairExample(s[a], s[b], lab) for a, b, lab in pair_indices(len(s), mode, rng)]


# -- scoring and decoding over transition tables --------------------------------

def _check_mode(mode: str) -> None:
    if mode not in SCORE_MODES:
        raise ValueError(f"score mode must be one of {SCORE_MODES}, got {mode!r}")


def score_ordering(table: np.ndarray, order: Sequence[int], mode: str = "adjacent-pairs") -> float:
    """Sum of transition scores over consecutive pairs (or every ordered pair)."""
    _check_mode(mode)
    order = check_permutation(order)
    if len(order) != len(table):
        raise ValueError(f"order has {len(order)} items for a {len(table)}-sentence table")
    total = 0.0
    if mode == "adjacent-pairs":
        for a, b in zip(order, order[1:]):
            total += table[a, b]
    else:
        for j in range(1, len(order)):
            for i in range(j):
                total += table[order[i], order[j]]
    return float(total)


def decode_exhaustive(table: np.ndarray, mode: str = "adjacent-pairs", cap: int = 5) -> list[int]:
    """Best-scoring permutation; ties go to the lexicographically smallest."""
    n = len(table)
    if n > cap:
        raise ValueError(f"exhaustive decoding is capped at {cap} sentences, got {n}")
    best, best_score = None, -np.inf
    for perm in itertools.permutations(range(n)):
        s = score_ordering(table, perm, mode)
        if best is None or s > best_score:
            best, best_score = perm, s
    return list(best)


@dataclass
class BeamHypothesis:
    chosen: tuple[int, ...]
    remaining: frozenset[int]
    score: float


def decode_beam(table: np.ndarray, width: int = 100, mode: str = "adjacent-pairs") -> list[int]:
    """Extend partial orderings one sentence at a time, keeping the ``width`` best.

    Hypotheses are ranked by score, then by lexicographically smaller prefix.
    """
    _check_mode(mode)
    if width < 1:
        raise ValueError("beam width must be >= 1")
    n = len(table)
    beam = [BeamHypothesis((), frozenset(range(n)), 0.0)]
    for step in range(n):
        candidates = []
        for hyp in beam:
            for j in sorted(hyp.remaining):
                score = hyp.score
                if mode == "adjacent-pairs":
                    if hyp.chosen:
                        score += table[hyp.chosen[-1], j]
                else:
                    for c in hyp.chosen:
                        score += table[c, j]
                candidates.append(BeamHypothesis(hyp.chosen + (j,), hyp.remaining - {j}, float(score)))
        candidates.sort(key=lambda h: (-h.score, h.chosen))
        beam = candidates[:width]
        assert all(len(h.chosen) == step + 1 for h in beam)
    return list(beam[0].chosen)


# -- estimator --------------------------------------------------------------------

class PairwiseOrderer(BaseOrderer):
    """Binary classifier over sentence pairs, decoded by searching for the best chain.

    Paragraphs up to ``exhaustive_cap`` sentences are decoded by enumeration,
    longer ones by beam search of width ``beam_width``. ``decode_counts_``
    records which path each prediction took.
    """

    model_kind = "pairwise"

    def __init__(
        self,
        encoder: str = "lstm",
        pair_mode: str = "adjacent",
        score_mode: str = "adjacent-pairs",
        beam_width: int = 100,
        exhaustive_cap: int = 5,
        embedding_dim: int = 16,
        feature_maps: int = 32,
        filter_length: int = 3,
        hidden_size: int = 32,
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
        self.pair_mode = pair_mode
        self.score_mode = score_mode
        self.beam_width = beam_width
        self.exhaustive_cap = exhaustive_cap
        self.embedding_dim = embedding_dim
        self.feature_maps = feature_maps
        self.filter_length = filter_length
        self.hidden_size = hidden_size
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

    def _init_params(self, docs, rng):
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"pair_mode must be one of {PAIR_MODES}, got {self.pair_mode!r}")
        _check_mode(self.score_mode)
        cfg = self._encoder_config()
        params = init_encoder(cfg, rng, "enc")
        params.update(init_mlp(2 * cfg.output_dim, self.hidden_size, rng, "head"))
        return params

    def _pair_logits(self, vecs: Tensor, left: np.ndarray, right: np.ndarray) -> Tensor:
        return mlp(concat([vecs[left], vecs[right]], axis=1), self.params_, "head")

    def _batch_loss(self, instances, rng):
        sentences, left, right, labels = [], [], [], []
        for inst in instances:
            base = len(sentences)
            gold = inst.unshuffle().sentences
            sentences.extend(gold)
            for a, b, lab in pair_indices(len(gold), self.pair_mode, rng):
                left.append(base + a)
                right.append(base + b)
                labels.append(lab)
        if not labels:
            return Tensor(0.0)
        x, lengths = self._embed(sentences)
        vecs = encode_sentences(self._encoder_config(), x, lengths, self.params_, "enc")
        logits = self._pair_logits(vecs, np.array(left), np.array(right))
        return bce_loss(logits, np.array(labels, dtype=np.float64))

    def transition_table(self, sentences: Sequence[Sentence]) -> np.ndarray:
        """``T[a, b] = log sigmoid(logit(a precedes b))``; diagonal is ``-inf``."""
        n = len(sentences)
        table = np.full((n, n), -np.inf)
        if n < 2:
            return table
        with no_grad():
            x, lengths = self._embed(sentences)
            vecs = encode_sentences(self._encoder_config(), x, lengths, self.params_, "enc")
            a, b = np.nonzero(~np.eye(n, dtype=bool))
            table[a, b] = log_sigmoid(self._pair_logits(vecs, a, b)).data
        return table

    def score_transition(self, a: Sentence, b: Sentence) -> float:
        """Log-probability that ``a`` immediately precedes ``b``."""
        with no_grad(), self._with_best():
            x, lengths = self._embed([a, b])
            vecs = encode_sentences(self._encoder_config(), x, lengths, self.params_, "enc")
            return float(log_sigmoid(self._pair_logits(vecs, np.array([0]), np.array([1]))).data[0])

    def _decode(self, instance: ShuffledInstance) -> list[int]:
        counts = self.__dict__.setdefault("decode_counts_", {"exhaustive": 0, "beam": 0})
        n = len(instance)
        if n == 1:
            counts["exhaustive"] += 1
            return [0]
        table = self.transition_table(instance.shuffled)
        if n <= self.exhaustive_cap:
            counts["exhaustive"] += 1
            return decode_exhaustive(table, self.score_mode, self.exhaustive_cap)
        counts["beam"] += 1
        return decode_beam(table, self.beam_width, self.score_mode)
