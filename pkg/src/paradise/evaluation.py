"""Point-wise detection metrics and partition agreement.

No point-adjust: every instant counts on its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .data import Partition


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # descending, from +inf to -inf

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(getattr(labels, "labels", labels)).ravel().astype(int)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores for {labels.size} labels")
    return scores, labels


def _sweep(scores: np.ndarray, labels: np.ndarray):
    """Thresholds and confusion counts for every distinct decision ``score >= t``."""
    distinct = np.unique(scores)[::-1]
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    thresholds = np.r_[np.inf, mids, -np.inf]
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # number of instants predicted positive at each threshold
    predicted = np.r_[0, np.searchsorted(-sorted_scores, -distinct, side="right")]
    cum_pos = np.r_[0, np.cumsum(sorted_labels)]
    tp = cum_pos[predicted]
    fp = predicted - tp
    return thresholds, tp.astype(float), fp.astype(float)


def roc_curve(scores, labels) -> RocCurve:
    scores, labels = _check(scores, labels)
    positives = int(labels.sum())
    negatives = labels.size - positives
    if positives == 0 or negatives == 0:
        raise ValueError("ROC needs both normal and anomalous labels")
    thresholds, tp, fp = _sweep(scores, labels)
    return RocCurve(fp / negatives, tp / positives, thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    dx = np.diff(curve.fpr)
    return float(np.sum(dx * (curve.tpr[1:] + curve.tpr[:-1]) / 2.0))


def roc_auc(scores, labels) -> float:
    return auc(roc_curve(scores, labels))


@dataclass(frozen=True)
class F1Result:
    f1: float
    precision: float
    recall: float
    threshold: float


def best_f1(scores, labels) -> F1Result:
    """Best F1 over all thresholds of the ROC sweep; predictions are ``score >= threshold``.

    Ties keep the highest threshold.
    """
    scores, labels = _check(scores, labels)
    positives = int(labels.sum())
    if positives == 0:
        raise ValueError("best F1 needs at least one anomalous label")
    thresholds, tp, fp = _sweep(scores, labels)
    predicted = tp + fp
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = tp / positives
    total = precision + recall
    f1 = np.divide(2.0 * precision * recall, total, out=np.zeros_like(tp), where=total > 0)
    best = int(np.argmax(f1))
    return F1Result(float(f1[best]), float(precision[best]), float(recall[best]),
                    float(thresholds[best]))


def adjusted_rand_index(a: Partition, b: Partition) -> float:
    """Chance-corrected pair-counting agreement between two partitions of the same variables."""
    if a.d != b.d:
        raise ValueError(f"partitions cover different numbers of variables: {a.d} vs {b.d}")
    la, lb = a.assignment(), b.assignment()
    table = np.zeros((len(a), len(b)), dtype=np.int64)
    np.add.at(table, (la, lb), 1)
    index = sum(comb(int(v), 2) for v in table.ravel())
    sum_a = sum(comb(int(v), 2) for v in table.sum(axis=1))
    sum_b = sum(comb(int(v), 2) for v in table.sum(axis=0))
    total = comb(a.d, 2)
    expected = sum_a * sum_b / total if total else 0.0
    maximum = (sum_a + sum_b) / 2.0
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


def metrics(scores, labels) -> dict[str, float]:
    best = best_f1(scores, labels)
    return {
        "f1": best.f1,
        "precision": best.precision,
        "recall": best.recall,
        "roc": roc_auc(scores, labels),
        "threshold": best.threshold,
    }
