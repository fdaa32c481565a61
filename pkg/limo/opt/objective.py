"""Hinge form of the LIMO objective and its exact subgradient

    J(W) = sum_j ||w_j||^2
           + lambda1 sum_i sum_{u in Y+_i, v in Y-_i} max(0, 1 - (w_u - w_v)'x_i)
           + lambda2 sum_j sum_{a in Y+_j, b in Y-_j} max(0, 1 - w_j'(x_a - x_b))

A pair is active when its hinge is strictly positive; the subgradient
at a kink is taken as 0.
"""
import numpy as np
from scipy import sparse

from .._data import FeatureMatrix, LabelMatrix


def _prepare(W, X, Y):
    w = np.asarray(W, dtype=np.float64)
    if isinstance(X, FeatureMatrix):
        X = X.values
    if not sparse.issparse(X):
        X = np.asarray(X, dtype=np.float64)
    y = Y.bits if isinstance(Y, LabelMatrix) else LabelMatrix(Y).bits
    if w.ndim != 2 or X.ndim != 2:
        raise ValueError(f"W and X need to be 2-d, got shapes {w.shape} and {X.shape}")
    if X.shape[1] != w.shape[0]:
        raise ValueError(f"X has {X.shape[1]} features but W has {w.shape[0]} rows")
    if y.shape != (X.shape[0], w.shape[1]):
        raise ValueError(f"Y has shape {y.shape}, expected {(X.shape[0], w.shape[1])}")
    scores = np.asarray(X @ w)
    return w, X, y, scores


def _pair_hinges(pos, neg):
    """Hinge sum and per-item active counts for all (pos, neg) score pairs

    Returns
    -------
    loss : float
        sum of max(0, 1 - (p - n))
    pos_active : ndarray of int
        number of active pairs per positive
    neg_active : ndarray of int
        number of active pairs per negative
    """
    neg_sorted = np.sort(neg)
    pos_sorted = np.sort(pos)
    # active iff n > p - 1
    start = np.searchsorted(neg_sorted, pos - 1.0, side='right')
    pos_active = neg.size - start
    tail = np.concatenate((np.cumsum(neg_sorted[::-1])[::-1], [0.0]))
    loss = float(np.sum(pos_active * (1.0 - pos) + tail[start]))
    neg_active = np.searchsorted(pos_sorted, neg + 1.0, side='left')
    return loss, pos_active, neg_active


def _label_side(y, scores):
    "hinge sum over label pairs of every row and the coefficient matrix of its subgradient"
    loss = 0.0
    coef = np.zeros(scores.shape)
    for i, (lab, row) in enumerate(zip(y, scores)):
        pos = np.flatnonzero(lab == 1)
        neg = np.flatnonzero(lab == 0)
        if not pos.size or not neg.size:
            continue
        row_loss, pos_active, neg_active = _pair_hinges(row[pos], row[neg])
        loss += row_loss
        coef[i, pos] = -pos_active
        coef[i, neg] = neg_active
    return loss, coef


def objective_terms(W, X, Y):
    """The three summands of the objective, without trade-off weights

    Parameters
    ----------
    W : ndarray of shape (n_features, n_labels)
    X : FeatureMatrix | ndarray | scipy.sparse matrix of shape (n_instances, n_features)
    Y : LabelMatrix | array-like of shape (n_instances, n_labels)

    Returns
    -------
    regularizer : float
    label_hinge : float
        summed over all (instance, relevant, irrelevant) triplets
    instance_hinge : float
        summed over all (label, positive, negative) triplets
    """
    w, X, y, scores = _prepare(W, X, Y)
    label_loss, _ = _label_side(y, scores)
    instance_loss, _ = _label_side(y.T, scores.T)
    return float(np.sum(w * w)), label_loss, instance_loss


def objective_value(W, X, Y, lambda1, lambda2):
    "J(W) for the given trade-off weights"
    reg, label_loss, instance_loss = objective_terms(W, X, Y)
    return reg + lambda1 * label_loss + lambda2 * instance_loss


def subgradient_terms(W, X, Y):
    """The three summands of the subgradient, without trade-off weights

    Returns
    -------
    regularizer : ndarray of shape (n_features, n_labels)
        2 W
    phi1 : ndarray of shape (n_features, n_labels)
        every active label pair (u, v) on x_i adds -x_i to column u and
        +x_i to column v
    phi2 : ndarray of shape (n_features, n_labels)
        every active instance pair (a, b) on label j adds x_b - x_a to
        column j
    """
    w, X, y, scores = _prepare(W, X, Y)
    _, coef1 = _label_side(y, scores)
    _, coef2 = _label_side(y.T, scores.T)
    phi1 = np.asarray(X.T @ coef1)
    phi2 = np.asarray(X.T @ coef2.T)
    return 2 * w, phi1, phi2


def full_subgradient(W, X, Y, lambda1, lambda2):
    """Exact subgradient of objective_value

    Returns
    -------
    g : ndarray of shape (n_features, n_labels)
        2W + lambda1 * phi1 + lambda2 * phi2
    """
    reg, phi1, phi2 = subgradient_terms(W, X, Y)
    return reg + lambda1 * phi1 + lambda2 * phi2
