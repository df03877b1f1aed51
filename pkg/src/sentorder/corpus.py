"""Documents, tokenization, n-gram vocabularies, embeddings and synthetic corpora."""

from __future__ import annotations

import hashlib
import json
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class CorpusFormatError(ValueError):
    """Raised for malformed corpus or embedding files."""


def derive_seed(seed: int, *parts) -> int:
    """Stable 63-bit child seed for ``(seed, *parts)``; independent of PYTHONHASHSEED."""
    h = hashlib.blake2b(repr((int(seed),) + tuple(parts)).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


# -- core types -----------------------------------------------------------------

@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"invalid token {tok!r}")

    @property
    def length(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        if not self.sentences:
            raise ValueError(f"document {self.id!r} has no sentences")

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class ShuffledInstance:
    """``perm[k]`` is the gold position of the sentence shown at shuffled slot ``k``."""

    doc_id: str
    shuffled: tuple[Sentence, ...]
    perm: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.shuffled))):
            raise ValueError(f"perm {self.perm} is not a permutation of 0..{len(self.shuffled) - 1}")

    def __len__(self) -> int:
        return len(self.shuffled)

    def unshuffle(self) -> Document:
        gold = [None] * len(self.perm)
        for k, g in enumerate(self.perm):
            gold[g] = self.shuffled[k]
        return Document(self.doc_id, tuple(gold))

    def gold_order(self) -> list[int]:
        """Shuffled indices listed in gold order (the ideal decoder output)."""
        return [int(k) for k in np.argsort(self.perm, kind="stable")]


# -- tokenization ---------------------------------------------------------------

def _is_punct(ch: str) -> bool:
    return ch in string.punctuation or unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> Sentence:
    """Lowercase, split on whitespace, peel leading/trailing punctuation into tokens.

    >>> tokenize("We propose a model.").tokens
    ('we', 'propose', 'a', 'model', '.')
    """
    if not text or not text.strip():
        raise ValueError("cannot tokenize empty text")
    tokens: list[str] = []
    for chunk in text.lower().split():
        lead: list[str] = []
        trail: list[str] = []
        i, j = 0, len(chunk)
        while i < j and _is_punct(chunk[i]):
            lead.append(chunk[i])
            i += 1
        while j > i and _is_punct(chunk[j - 1]):
            trail.append(chunk[j - 1])
            j -= 1
        tokens.extend(lead)
        if i < j:
            tokens.append(chunk[i:j])
        tokens.extend(reversed(trail))
    return Sentence(tuple(tokens))


def make_document(doc_id: str, texts: Sequence[str]) -> Document:
    return Document(doc_id, tuple(tokenize(t) for t in texts))


# -- n-gram vocabulary ----------------------------------------------------------

def _ngrams(tokens: Sequence[str], n: int) -> Iterable[str]:
    for i in range(len(tokens) - n + 1):
        yield " ".join(tokens[i : i + n])


@dataclass
class Vocabulary:
    unigrams: dict[str, int] = field(default_factory=dict)
    bigrams: dict[str, int] = field(default_factory=dict)
    trigrams: dict[str, int] = field(default_factory=dict)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.unigrams), len(self.bigrams), len(self.trigrams)

    def __len__(self) -> int:
        return sum(self.sizes)

    def maps(self) -> tuple[dict[str, int], dict[str, int], dict[str, int]]:
        return self.unigrams, self.bigrams, self.trigrams

    def to_dict(self) -> dict:
        return {
            "unigrams": list(self.unigrams),
            "bigrams": list(self.bigrams),
            "trigrams": list(self.trigrams),
        }

    @classmethod
    def from_dict(cls, blob: dict) -> "Vocabulary":
        vocab = cls()
        offset = 0
        for key in ("unigrams", "bigrams", "trigrams"):
            target = getattr(vocab, key)
            for gram in blob[key]:
                target[gram] = offset
                offset += 1
        return vocab


def build_vocab(corpus: Sequence[Document], sizes: tuple[int, int, int] = (3000, 2000, 1000)) -> Vocabulary:
    """Top-``u``/``b``/``t`` uni/bi/trigrams by frequency, ties broken lexicographically.

    N-grams never span a sentence boundary. Indices are dense: unigrams first,
    then bigrams, then trigrams.
    """
    if not corpus:
        raise ValueError("build_vocab needs a non-empty corpus")
    if any(s < 0 for s in sizes):
        raise ValueError(f"vocabulary sizes must be >= 0, got {sizes}")
    counts = [Counter(), Counter(), Counter()]
    for doc in corpus:
        for sent in doc.sentences:
            for n in range(3):
                if sizes[n]:
                    counts[n].update(_ngrams(sent.tokens, n + 1))
    vocab = Vocabulary()
    offset = 0
    for n, target in enumerate(vocab.maps()):
        ranked = sorted(counts[n].items(), key=lambda kv: (-kv[1], kv[0]))[: sizes[n]]
        for gram, _ in ranked:
            target[gram] = offset
            offset += 1
    return vocab


def featurize_bow(sentence: Sentence, vocab: Vocabulary) -> dict[int, int]:
    """Sparse n-gram counts ``{feature index: count}`` for in-vocabulary n-grams."""
    out: dict[int, int] = {}
    for n, table in enumerate(vocab.maps()):
        if not table:
            continue
        for gram in _ngrams(sentence.tokens, n + 1):
            idx = table.get(gram)
            if idx is not None:
                out[idx] = out.get(idx, 0) + 1
    return dict(sorted(out.items()))


def bow_matrix(sentences: Sequence[Sentence], vocab: Vocabulary) -> np.ndarray:
    mat = np.zeros((len(sentences), len(vocab)))
    for row, sent in enumerate(sentences):
        for idx, cnt in featurize_bow(sent, vocab).items():
            mat[row, idx] = cnt
    return mat


# -- embeddings -----------------------------------------------------------------

OOV_POLICIES = ("zeros", "random")


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    oov_policy: str = "zeros"
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("embedding dim must be >= 1")
        if self.oov_policy not in OOV_POLICIES:
            raise ValueError(f"oov_policy must be one of {OOV_POLICIES}, got {self.oov_policy!r}")
        for tok, vec in self.vectors.items():
            if np.shape(vec) != (self.dim,):
                raise ValueError(f"vector for {tok!r} has shape {np.shape(vec)}, expected ({self.dim},)")
        self._oov_cache: dict[str, np.ndarray] = {}

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is not None:
            return vec
        if self.oov_policy == "zeros":
            return np.zeros(self.dim)
        vec = self._oov_cache.get(token)
        if vec is None:
            rng = np.random.default_rng(derive_seed(self.seed, "oov", token))
            vec = self._oov_cache[token] = rng.standard_normal(self.dim)
        return vec

    @classmethod
    def random(cls, tokens: Iterable[str], dim: int, seed: int = 0, oov_policy: str = "zeros") -> "EmbeddingTable":
        """Seeded N(0, 1) vectors; each token's vector depends only on (seed, token)."""
        vectors = {
            tok: np.random.default_rng(derive_seed(seed, "emb", tok)).standard_normal(dim)
            for tok in sorted(set(tokens))
        }
        return cls(dim, vectors, oov_policy=oov_policy, seed=seed)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "oov_policy": self.oov_policy,
            "seed": self.seed,
            "tokens": list(self.vectors),
        }

    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((0, self.dim))
        return np.stack(list(self.vectors.values()))

    @classmethod
    def from_arrays(cls, meta: dict, matrix: np.ndarray) -> "EmbeddingTable":
        vectors = {tok: matrix[i].copy() for i, tok in enumerate(meta["tokens"])}
        return cls(int(meta["dim"]), vectors, oov_policy=meta["oov_policy"], seed=int(meta["seed"]))


def embed_sentence(sentence: Sentence, table: EmbeddingTable, max_len: int = 64) -> np.ndarray:
    """``max_len x dim`` matrix: token vectors, then zero rows; longer sentences truncated."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    out = np.zeros((max_len, table.dim))
    for i, tok in enumerate(sentence.tokens[:max_len]):
        out[i] = table.lookup(tok)
    return out


def embed_batch(
    sentences: Sequence[Sentence], table: EmbeddingTable, max_len: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Stack sentences into ``(S, L, dim)`` with ``L = min(max_len, longest)`` plus true lengths."""
    lengths = np.array([min(len(s), max_len) for s in sentences], dtype=np.int64)
    width = int(lengths.max()) if len(sentences) else 1
    out = np.zeros((len(sentences), width, table.dim))
    for i, sent in enumerate(sentences):
        for j, tok in enumerate(sent.tokens[:width]):
            out[i, j] = table.lookup(tok)
    return out, lengths


# -- shuffling ------------------------------------------------------------------

def shuffle_document(doc: Document, rng_seed: int) -> ShuffledInstance:
    """Fisher-Yates shuffle driven by ``numpy.random.default_rng(rng_seed)``.

    For ``i`` from ``n-1`` down to 1, draw ``j`` uniformly in ``[0, i]`` and swap.
    """
    rng = np.random.default_rng(rng_seed)
    order = list(range(len(doc)))
    for i in range(len(order) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return ShuffledInstance(doc.id, tuple(doc.sentences[g] for g in order), tuple(order))


# -- synthetic corpora ----------------------------------------------------------

MAX_SYNTHETIC_LEN = 16


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the desk-scale synthetic generator.

    ``positional_signal`` adds a marker token ``p<gold position>`` to each
    sentence; with probability ``marker_noise`` the marker is shifted by one
    position instead. ``context_signal`` assigns each document a topic in
    {0, 1}, puts ``t<topic>`` into a single random sentence, and gives each
    sentence a role token ``r<q>`` whose order runs forward for topic 0 and
    backward for topic 1, so a role is only decodable alongside its paragraph.
    ``transition_signal`` adds chain tokens ``c<(start + p) mod chain_size>``
    with a random start per document; each is scrambled with probability
    ``link_noise``. Adjacent sentences are then identifiable locally while
    single sentences carry no position information.
    """

    num_docs: int = 2000
    len_range: tuple[int, int] = (2, 8)
    vocab_size: int = 50
    positional_signal: bool = True
    context_signal: bool = False
    transition_signal: bool = False
    marker_noise: float = 0.0
    link_noise: float = 0.0
    filler_range: tuple[int, int] = (3, 6)
    chain_size: int = 24

    def validate(self) -> None:
        lo, hi = self.len_range
        if self.num_docs < 0:
            raise ValueError("num_docs must be >= 0")
        if not (1 <= lo <= hi <= MAX_SYNTHETIC_LEN):
            raise ValueError(f"len_range must lie within [1, {MAX_SYNTHETIC_LEN}], got {self.len_range}")
        flo, fhi = self.filler_range
        if not (0 <= flo <= fhi):
            raise ValueError(f"invalid filler_range {self.filler_range}")
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        if not (0.0 <= self.marker_noise <= 1.0 and 0.0 <= self.link_noise <= 1.0):
            raise ValueError("noise rates must lie in [0, 1]")
        if self.transition_signal and self.chain_size <= hi:
            raise ValueError("chain_size must exceed the longest document")


def generate_synthetic_corpus(spec: SyntheticSpec, seed: int = 0) -> list[Document]:
    spec.validate()
    docs = []
    for d in range(spec.num_docs):
        rng = np.random.default_rng(derive_seed(seed, "synthetic", d))
        n = int(rng.integers(spec.len_range[0], spec.len_range[1] + 1))
        signals: list[list[str]] = [[] for _ in range(n)]
        if spec.positional_signal:
            for p in range(n):
                shown = p
                if n > 1 and rng.random() < spec.marker_noise:
                    shown = p + (1 if p == 0 else -1 if p == n - 1 else int(rng.choice([-1, 1])))
                signals[p].append(f"p{shown}")
        if spec.context_signal:
            topic = int(rng.integers(0, 2))
            signals[int(rng.integers(0, n))].append(f"t{topic}")
            for p in range(n):
                signals[p].append(f"r{p if topic == 0 else n - 1 - p}")
        if spec.transition_signal:
            start = int(rng.integers(0, spec.chain_size))
            for p in range(n):
                link = (start + p) % spec.chain_size
                if rng.random() < spec.link_noise:
                    link = int(rng.integers(0, spec.chain_size))
                signals[p].append(f"c{link}")
        sentences = []
        for p in range(n):
            k = int(rng.integers(spec.filler_range[0], spec.filler_range[1] + 1))
            toks = [f"w{int(i)}" for i in rng.integers(0, spec.vocab_size, size=k)]
            for sig in signals[p]:
                toks.insert(int(rng.integers(0, len(toks) + 1)), sig)
            if not toks:
                toks = ["w0"]
            toks.append(".")
            sentences.append(Sentence(tuple(toks)))
        docs.append(Document(f"syn{seed}-{d:06d}", tuple(sentences)))
    return docs


# -- file formats ---------------------------------------------------------------

def load_corpus(path) -> list[Document]:
    """Read JSON Lines ``{"id": str, "sentences": [str, ...]}`` (gold order)."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
                raise CorpusFormatError(f"{path}:{lineno}: expected an object with a string 'id'")
            sents = obj.get("sentences")
            if not isinstance(sents, list) or not sents:
                raise CorpusFormatError(f"{path}:{lineno}: 'sentences' must be a non-empty list")
            if obj["id"] in seen:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate document id {obj['id']!r}")
            seen.add(obj["id"])
            try:
                docs.append(make_document(obj["id"], [str(s) for s in sents]))
            except ValueError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from None
    return docs


def write_corpus(docs: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"id": doc.id, "sentences": [s.text for s in doc.sentences]}) + "\n")


def load_embeddings(path, oov_policy: str = "zeros", seed: int = 0) -> EmbeddingTable:
    """Read the word2vec text format: ``<count> <dim>`` header, then ``<token> <f1> ... <fdim>``."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise CorpusFormatError(f"{path}:1: header must be '<vocab_count> <dim>'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise CorpusFormatError(f"{path}:1: header must hold two integers") from None
        if dim < 1 or count < 0:
            raise CorpusFormatError(f"{path}:1: invalid header values {count} {dim}")
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected {dim} values after the token, got {len(parts) - 1}"
                )
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise CorpusFormatError(f"{path}:{lineno}: non-numeric vector entry") from None
            if parts[0] in vectors:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate token {parts[0]!r}")
            vectors[parts[0]] = vec
    if len(vectors) != count:
        raise CorpusFormatError(f"{path}: header declares {count} rows, found {len(vectors)}")
    return EmbeddingTable(dim, vectors, oov_policy=oov_policy, seed=seed)
