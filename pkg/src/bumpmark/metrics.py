"""Bit-level recall/precision over decoded matrices.

TP counts 1-bits retrieved correctly, FN 1-bits missed, FP 0-bits retrieved
as 1. Recall = TP/(TP+FN), precision = TP/(TP+FP); a zero denominator makes
the value undefined (None) and the image is excluded from that aggregate.
Aggregates pool counts globally across images.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


@dataclass
class ImageScore:
    tp: int
    fn: int
    fp: int
    recall: float | None
    precision: float | None
    exact: bool
    status: str = "ok"


@dataclass
class MetricsReport:
    per_image: list = field(default_factory=list)

    @property
    def counts(self):
        ok = [s for s in self.per_image if s.status == "ok"]
        return (
            sum(s.tp for s in ok),
            sum(s.fn for s in ok),
            sum(s.fp for s in ok),
        )

    @property
    def recall(self):
        tp, fn, _ = self.counts
        return tp / (tp + fn) if tp + fn > 0 else None

    @property
    def precision(self):
        tp, _, fp = self.counts
        return tp / (tp + fp) if tp + fp > 0 else None

    @property
    def exact_match_rate(self):
        ok = [s for s in self.per_image if s.status == "ok"]
        return sum(s.exact for s in ok) / len(ok) if ok else None

    def bit_accuracy(self, m: int):
        ok = [s for s in self.per_image if s.status == "ok"]
        if not ok:
            return None
        wrong = sum(s.fn + s.fp for s in ok)
        return 1.0 - wrong / (len(ok) * m * m)


def bit_metrics(pred: np.ndarray, truth: np.ndarray) -> ImageScore:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidArgument(f"matrix sizes differ: {pred.shape} vs {truth.shape}")
    tp = int(np.sum((truth == 1) & (pred == 1)))
    fn = int(np.sum((truth == 1) & (pred == 0)))
    fp = int(np.sum((truth == 0) & (pred == 1)))
    recall = tp / (tp + fn) if tp + fn > 0 else None
    precision = tp / (tp + fp) if tp + fp > 0 else None
    return ImageScore(
        tp=tp,
        fn=fn,
        fp=fp,
        recall=recall,
        precision=precision,
        exact=bool(np.array_equal(pred, truth)),
    )
