"""Sentence ordering models, metrics and an experiment harness."""

from .base import load_model
from .corpus import (
    Document,
    EmbeddingTable,
    Sentence,
    ShuffledInstance,
    SyntheticSpec,
    Vocabulary,
    build_vocab,
    generate_synthetic_corpus,
    load_corpus,
    load_embeddings,
    make_document,
    shuffle_document,
    tokenize,
    write_corpus,
)
from .firstnext import FirstNextOrderer
from .metrics import MetricsReport, evaluate, kendall_tau, pmr, positional_accuracy
from .pairwise import PairwiseOrderer, decode_beam, decode_exhaustive
from .regression import RegressionOrderer, decode_argsort, fit_bow_linear, gold_targets

__version__ = "0.1.0"

__all__ = [
    "Document",
    "EmbeddingTable",
    "FirstNextOrderer",
    "MetricsReport",
    "PairwiseOrderer",
    "RegressionOrderer",
    "Sentence",
    "ShuffledInstance",
    "SyntheticSpec",
    "Vocabulary",
    "build_vocab",
    "decode_argsort",
    "decode_beam",
    "decode_exhaustive",
    "evaluate",
    "fit_bow_linear",
    "generate_synthetic_corpus",
    "gold_targets",
    "kendall_tau",
    "load_corpus",
    "load_embeddings",
    "load_model",
    "make_document",
    "pmr",
    "positional_accuracy",
    "shuffle_document",
    "tokenize",
    "write_corpus",
]
