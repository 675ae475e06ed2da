"""Threshold-free ranking metrics for point-wise anomaly scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ShapeError, UndefinedMetricError


@dataclass(frozen=True)
class EvalResult:
    roc_auc: float
    pr_auc: float
    n_pos: int
    n_neg: int


def _check(scores, labels):
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ShapeError(f"{scores.size} scores vs {labels.size} labels")
    if not np.all(np.isin(labels, (0, 1))):
        raise ShapeError("labels must be 0 or 1")
    if not np.all(np.isfinite(scores)):
        raise ShapeError("scores must be finite")
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise UndefinedMetricError("both classes must be present")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative (ties count 1/2)."""
    scores, labels = _check(scores, labels)
    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    ranks = rankdata(scores)  # midranks give ties half credit
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision: step-wise area under the precision-recall curve.

    Thresholds are the distinct scores in descending order, so tied scores
    enter the curve together.
    """
    scores, labels = _check(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # keep the last index of each run of tied scores
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / tp[-1]
    gain = np.diff(np.r_[0.0, recall])
    return float(np.sum(gain * precision))


def evaluate(scores, labels) -> EvalResult:
    scores, labels = _check(scores, labels)
    return EvalResult(
        roc_auc=roc_auc(scores, labels),
        pr_auc=pr_auc(scores, labels),
        n_pos=int(labels.sum()),
        n_neg=int((~labels).sum()),
    )
