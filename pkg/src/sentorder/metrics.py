"""Kendall tau, perfect match ratio and positional accuracy for sentence orderings.

Orderings are sequences of item labels, e.g. the gold positions of the
sentences in the order a model placed them; the gold ordering is then
``range(n)``.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._validation import check_same_length


def kendall_tau(pred: Sequence[int], gold: Sequence[int]) -> float:
    """(concordant - discordant) / (n(n-1)/2) between two orderings of the same items."""
    n = len(pred)
    if n != len(gold):
        raise ValueError(f"orderings differ in length: {n} vs {len(gold)}")
    if n < 2:
        raise ValueError("Kendall tau is undefined for fewer than 2 items")
    rank = {item: i for i, item in enumerate(gold)}
    if len(rank) != n:
        raise ValueError("gold ordering repeats an item")
    try:
        r = np.array([rank[item] for item in pred])
    except KeyError as exc:
        raise ValueError(f"pred contains item {exc.args[0]!r} absent from gold") from None
    if len(set(r.tolist())) != n:
        raise ValueError("pred is not a permutation of gold")
    upper = np.triu_indices(n, 1)
    diff = (r[None, :] - r[:, None])[upper]
    concordant = int((diff > 0).sum())
    discordant = int((diff < 0).sum())
    return (concordant - discordant) / (n * (n - 1) / 2)


def pmr(preds: Sequence[Sequence[int]], golds: Sequence[Sequence[int]]) -> float:
    """Fraction of orderings that match their gold ordering exactly."""
    check_same_length(preds, golds)
    return sum(list(p) == list(g) for p, g in zip(preds, golds)) / len(preds)


def positional_accuracy(preds: Sequence[Sequence[int]], golds: Sequence[Sequence[int]]) -> float:
    """Matching positions over total positions, pooled across the corpus."""
    check_same_length(preds, golds)
    hits = total = 0
    for p, g in zip(preds, golds):
        if len(p) != len(g):
            raise ValueError(f"orderings differ in length: {len(p)} vs {len(g)}")
        hits += sum(a == b for a, b in zip(p, g))
        total += len(g)
    return hits / total


@dataclass
class DocResult:
    length: int
    kt: float | None
    exact: bool
    hits: int


def score_document(pred: Sequence[int], gold: Sequence[int]) -> DocResult:
    n = len(gold)
    kt = kendall_tau(pred, gold) if n >= 2 else None
    return DocResult(
        length=n,
        kt=kt,
        exact=list(pred) == list(gold),
        hits=sum(a == b for a, b in zip(pred, gold)),
    )


@dataclass
class LengthBucket:
    count: int
    kt_mean: float | None
    pmr: float
    pa: float


@dataclass
class MetricsReport:
    kt_mean: float | None
    pmr: float
    pa: float
    count: int
    kt_skipped: int
    by_length: dict[int, LengthBucket] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["by_length"] = {str(k): asdict(v) for k, v in sorted(self.by_length.items())}
        return out

    @classmethod
    def from_dict(cls, blob: dict) -> "MetricsReport":
        return cls(
            kt_mean=blob["kt_mean"],
            pmr=blob["pmr"],
            pa=blob["pa"],
            count=blob["count"],
            kt_skipped=blob["kt_skipped"],
            by_length={int(k): LengthBucket(**v) for k, v in blob.get("by_length", {}).items()},
            extra=blob.get("extra", {}),
        )

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_by_length_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["length", "count", "kt_mean", "pmr", "pa"])
            for n, b in sorted(self.by_length.items()):
                writer.writerow([n, b.count, "" if b.kt_mean is None else repr(b.kt_mean), repr(b.pmr), repr(b.pa)])


def _mean(values):
    return sum(values) / len(values) if values else None


def aggregate_by_length(results: Sequence[DocResult]) -> dict[int, LengthBucket]:
    groups: dict[int, list[DocResult]] = defaultdict(list)
    for r in results:
        groups[r.length].append(r)
    out = {}
    for n in sorted(groups):
        rs = groups[n]
        out[n] = LengthBucket(
            count=len(rs),
            kt_mean=_mean([r.kt for r in rs if r.kt is not None]),
            pmr=sum(r.exact for r in rs) / len(rs),
            pa=sum(r.hits for r in rs) / (n * len(rs)),
        )
    return out


def evaluate(preds: Sequence[Sequence[int]], golds: Sequence[Sequence[int]]) -> MetricsReport:
    """Corpus report; single-item orderings are exact for PMR/PA and skipped for KT."""
    check_same_length(preds, golds)
    results = [score_document(p, g) for p, g in zip(preds, golds)]
    kts = [r.kt for r in results if r.kt is not None]
    return MetricsReport(
        kt_mean=_mean(kts),
        pmr=sum(r.exact for r in results) / len(results),
        pa=sum(r.hits for r in results) / sum(r.length for r in results),
        count=len(results),
        kt_skipped=len(results) - len(kts),
        by_length=aggregate_by_length(results),
    )
