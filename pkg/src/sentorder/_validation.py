"""Input validation helpers shared by the estimators and metrics."""

from __future__ import annotations

from typing import Sequence

from .corpus import Document, ShuffledInstance


def check_permutation(order: Sequence[int], name: str = "order") -> list[int]:
    order = [int(i) for i in order]
    if sorted(order) != list(range(len(order))):
        raise ValueError(f"{name} is not a permutation of 0..{len(order) - 1}: {order}")
    return order


def check_same_length(preds: Sequence, golds: Sequence) -> None:
    if len(preds) != len(golds):
        raise ValueError(f"got {len(preds)} predictions for {len(golds)} gold orderings")
    if not preds:
        raise ValueError("need at least one ordering")


def check_documents(docs, name: str = "documents") -> list[Document]:
    docs = list(docs)
    if not docs:
        raise ValueError(f"{name} must be non-empty")
    for d in docs:
        if not isinstance(d, Document):
            raise TypeError(f"{name} must hold Document objects, got {type(d).__name__}")
    return docs


def check_instances(instances) -> list[ShuffledInstance]:
    if isinstance(instances, ShuffledInstance):
        raise TypeError("pass a list of ShuffledInstance, not a single instance")
    out = list(instances)
    for x in out:
        if not isinstance(x, ShuffledInstance):
            raise TypeError(f"expected ShuffledInstance, got {type(x).__name__}")
    return out
