"""Confusion matrix and the evaluation measures built on it.

Counts are integers throughout; each metric performs a single final
division, with zero denominators defined as 0.0 and flagged in the
report rather than raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .taxonomy import CATEGORIES, Category


@dataclass
class ConfusionMatrix:
    """Square count matrix; rows are actual classes, columns predicted."""

    counts: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.counts, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {m.shape}")
        if (m < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")
        self.counts = m

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, c: int) -> int:
        return int(self.counts[c, c])

    def fp(self, c: int) -> int:
        return int(self.counts[:, c].sum()) - self.tp(c)

    def fn(self, c: int) -> int:
        return int(self.counts[c, :].sum()) - self.tp(c)

    def tn(self, c: int) -> int:
        return self.total() - self.tp(c) - self.fp(c) - self.fn(c)


def confusion(pairs: list[tuple[Category, Category]]) -> ConfusionMatrix:
    """Tally (actual, predicted) pairs on the five canonical classes."""
    m = np.zeros((len(CATEGORIES), len(CATEGORIES)), dtype=np.int64)
    for actual, predicted in pairs:
        m[actual.index, predicted.index] += 1
    return ConfusionMatrix(m)


def precision(cm: ConfusionMatrix, c: int) -> float:
    """TP/(TP+FP) for class c; 0.0 when the class was never predicted."""
    tp, fp = cm.tp(c), cm.fp(c)
    return tp / (tp + fp) if tp + fp else 0.0


def recall(cm: ConfusionMatrix, c: int) -> float:
    """TP/(TP+FN) for class c; 0.0 when the class never occurred."""
    tp, fn = cm.tp(c), cm.fn(c)
    return tp / (tp + fn) if tp + fn else 0.0


def accuracy(cm: ConfusionMatrix) -> float:
    """trace/total; 0.0 on an empty matrix."""
    total = cm.total()
    return int(np.trace(cm.counts)) / total if total else 0.0


@dataclass
class MetricsReport:
    """Per-class and aggregate metrics plus zero-denominator flags."""

    precision: dict[str, float]
    recall: dict[str, float]
    accuracy: float
    macro_precision: float
    macro_recall: float
    total: int
    zero_denominator: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "precision": dict(self.precision),
            "recall": dict(self.recall),
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "total": self.total,
            "zero_denominator": list(self.zero_denominator),
        }


def metrics_report(cm: ConfusionMatrix, labels: list[str] | None = None) -> MetricsReport:
    """Evaluate every class of the matrix.

    Labels default to canonical category ids for 5-class matrices and
    stringified indices otherwise.
    """
    if labels is None:
        if cm.n == len(CATEGORIES):
            labels = [c.canonical_id for c in CATEGORIES]
        else:
            labels = [str(i) for i in range(cm.n)]
    if len(labels) != cm.n:
        raise ValueError(f"need {cm.n} labels, got {len(labels)}")
    prec: dict[str, float] = {}
    rec: dict[str, float] = {}
    flags: list[str] = []
    for i, label in enumerate(labels):
        if cm.tp(i) + cm.fp(i) == 0:
            flags.append(f"precision:{label}")
        if cm.tp(i) + cm.fn(i) == 0:
            flags.append(f"recall:{label}")
        prec[label] = precision(cm, i)
        rec[label] = recall(cm, i)
    if cm.total() == 0:
        flags.append("accuracy")
    return MetricsReport(
        precision=prec,
        recall=rec,
        accuracy=accuracy(cm),
        macro_precision=sum(prec.values()) / cm.n,
        macro_recall=sum(rec.values()) / cm.n,
        total=cm.total(),
        zero_denominator=flags,
    )
