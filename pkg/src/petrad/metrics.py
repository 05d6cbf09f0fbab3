"""Ranking and confusion-matrix metrics."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(s+ > s-) + 0.5 P(s+ == s-), via midranks.

    The rank sum of positives minus its minimum is an integer or half-integer
    count of won pairs, so the result is exact up to one final division.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1D and of equal length")
    pos = y == 1
    n1 = int(pos.sum())
    n0 = int(len(y) - n1)
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes present")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    r = rankdata(s, method="average")
    # doubled rank sum keeps everything in integers
    u2 = int(round(2.0 * r[pos].sum())) - n1 * (n1 + 1)
    return u2 / (2.0 * n1 * n0)


def classification_metrics(pred, labels) -> dict[str, float]:
    p = np.asarray(pred).astype(np.int64)
    y = np.asarray(labels).astype(np.int64)
    if p.size == 0 or p.shape != y.shape:
        raise ValueError("predictions and labels must be non-empty and of equal length")
    tp = int(((p == 1) & (y == 1)).sum())
    fp = int(((p == 1) & (y == 0)).sum())
    fn = int(((p == 0) & (y == 1)).sum())
    err = float((p != y).mean())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"error": err, "precision": precision, "recall": recall, "f1": f1}


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, fpr, tpr) at every distinct score, from (0,0) to (1,1).

    A sample is called positive when its score >= threshold; the first
    threshold is +inf (nothing positive).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("ROC needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    thr = np.r_[np.inf, s[last]]
    return thr, np.r_[0.0, fps / n0], np.r_[0.0, tps / n1]
