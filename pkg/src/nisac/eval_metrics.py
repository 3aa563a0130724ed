"""Map-reconstruction metrics and discretization helpers.

All metrics are pure reductions over ``[n_samples, n_cells]`` arrays.
"""

from __future__ import annotations

import numpy as np

from .nn.model import bce


def _pair(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"predictions {p.shape} and labels {y.shape} differ")
    if p.ndim == 1:
        p, y = p[None, :], y[None, :]
    return p, y


def prob_map_accuracy(predictions, labels) -> float:
    """Fraction of samples whose predicted argmax cell is the labelled cell.

    Ties in the prediction resolve to the lowest cell index.
    """
    p, y = _pair(predictions, labels)
    if len(p) == 0:
        raise ValueError("no samples")
    return float(np.mean(np.argmax(p, axis=-1) == np.argmax(y, axis=-1)))


def precision_recall_curve(predictions, labels, n_thresholds: int = 200):
    """Micro-averaged (thresholds, precision, recall), thresholds ascending.

    Thresholds are the sorted unique prediction values, evenly subsampled by
    rank when there are more than ``n_thresholds``. A cell is called positive
    when its score is ``>= threshold``.
    """
    if n_thresholds < 2:
        raise ValueError("n_thresholds must be at least 2")
    p, y = _pair(predictions, labels)
    s = p.ravel()
    truth = y.ravel()
    if not np.all((truth == 0) | (truth == 1)):
        raise ValueError("labels must be binary")
    n_true = truth.sum()
    if n_true == 0:
        raise ValueError("labels contain no positives: recall is undefined")
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    pos_before = np.concatenate([[0.0], np.cumsum(truth[order])])
    thresholds = np.unique(s)
    if len(thresholds) > n_thresholds:
        pick = np.round(np.linspace(0, len(thresholds) - 1, n_thresholds)).astype(int)
        thresholds = thresholds[np.unique(pick)]
    first = np.searchsorted(s_sorted, thresholds, side="left")
    called = len(s) - first
    tp = n_true - pos_before[first]
    return thresholds, tp / called, tp / n_true


def pr_break_even(predictions, labels, n_thresholds: int = 200) -> float:
    """Precision at which the interpolated PR polyline meets precision = recall.

    With several crossings the largest value is returned. A curve that never
    crosses (e.g. a constant predictor) yields the precision of the point
    closest to the diagonal.
    """
    _, prec, rec = precision_recall_curve(predictions, labels, n_thresholds)
    d = prec - rec
    hits = list(prec[d == 0])
    for i in range(len(d) - 1):
        if d[i] * d[i + 1] < 0:
            f = d[i] / (d[i] - d[i + 1])
            hits.append(prec[i] + f * (prec[i + 1] - prec[i]))
    if hits:
        return float(max(hits))
    return float(prec[np.argmin(np.abs(d))])


def bce_test_loss(predictions, labels) -> float:
    """Mean binary cross-entropy over samples (the training BCE)."""
    p, y = _pair(predictions, labels)
    return float(np.mean(bce(p, y)))


def discretize_hard(prediction, threshold: float = 0.2) -> np.ndarray:
    """Binary map: 1 where ``prediction >= threshold``."""
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    return (np.asarray(prediction) >= threshold).astype(np.uint8)
