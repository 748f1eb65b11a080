"""Clustering accuracy, normalized mutual information and purity."""

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError


def _pair(predicted, truth):
    pred = np.asarray(predicted).ravel()
    true = np.asarray(truth).ravel()
    if pred.shape != true.shape:
        raise DimensionError("predicted", true.shape, pred.shape)
    if pred.size == 0:
        raise DimensionError("predicted", "nonempty labels", pred.shape)
    return pred, true


def contingency(predicted, truth):
    """Counts ``C[a, b]`` of samples with predicted cluster ``a`` and class ``b``."""
    pred, true = _pair(predicted, truth)
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(true, return_inverse=True)
    C = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(C, (pi, ti), 1)
    return C


def accuracy(predicted, truth):
    """Fraction of samples matched under the best one-to-one label mapping."""
    C = contingency(predicted, truth)
    rows, cols = linear_sum_assignment(C, maximize=True)
    return C[rows, cols].sum() / C.sum()


def nmi(predicted, truth):
    """Mutual information normalized by the geometric mean of the entropies.

    Natural logarithms. Two identical single-cluster partitions score 1.0;
    otherwise a zero entropy on either side scores 0.0.
    """
    C = contingency(predicted, truth).astype(float)
    n = C.sum()
    pa = C.sum(axis=1) / n
    pb = C.sum(axis=0) / n
    ha = -np.sum(pa * np.log(pa))
    hb = -np.sum(pb * np.log(pb))
    if ha == 0.0 or hb == 0.0:
        return 1.0 if (C.shape == (1, 1)) else 0.0
    nz = C > 0
    pab = C[nz] / n
    mi = np.sum(pab * np.log(pab / np.outer(pa, pb)[nz]))
    return float(max(0.0, min(1.0, mi / np.sqrt(ha * hb))))


def purity(predicted, truth):
    C = contingency(predicted, truth)
    return C.max(axis=1).sum() / C.sum()


def evaluate(predicted, truth):
    """All three scores as a dict."""
    return {"acc": float(accuracy(predicted, truth)), "nmi": float(nmi(predicted, truth)),
            "purity": float(purity(predicted, truth))}
