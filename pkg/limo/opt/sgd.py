"""Weighted triplet sampling and the compiled SGD inner loop

All random draws happen here with numpy, in fixed-size chunks, so that the
numba kernel is a pure function of its array inputs.
"""
from collections import namedtuple

import numpy as np
from numba import njit

from .._data import LabelMatrix
from .._gen_utils import NumericError, TrainingSetupError, logger, substream


CHUNK = 1 << 16

SamplingWeights = namedtuple('SamplingWeights', ['per_instance', 'per_label'])
SamplingWeights.__doc__ = """Normalised triplet counts c_i = |Y+_i||Y-_i| / sum and c_j alike

per_instance : ndarray of shape (n_instances,) | None
per_label : ndarray of shape (n_labels,) | None
    None for a side that was not requested.
"""


def _bits(Y):
    return Y.bits if isinstance(Y, LabelMatrix) else LabelMatrix(Y).bits


def _pair_counts(y):
    pos = y.sum(axis=1).astype(np.int64)
    return pos * (y.shape[1] - pos)


def sampling_weights(Y, label_wise=True, instance_wise=True):
    """Per-instance and per-label sampling weights

    Parameters
    ----------
    Y : LabelMatrix | array-like of shape (n_instances, n_labels)
    label_wise : bool
        compute the per-instance weights (used by label-wise triplets)
    instance_wise : bool
        compute the per-label weights (used by instance-wise triplets)

    Returns
    -------
    weights : SamplingWeights
        degenerate rows/columns get exactly 0.
    """
    y = _bits(Y)
    out = []
    for active, counts, what in ((label_wise, _pair_counts(y), 'instance'),
                                 (instance_wise, _pair_counts(y.T), 'label')):
        if not active:
            out.append(None)
            continue
        total = int(counts.sum())
        if total == 0:
            raise TrainingSetupError(f"every {what} has only relevant or only irrelevant entries; "
                                     f"no {what}-side triplet can be sampled")
        out.append(counts / total)
    return SamplingWeights(*out)


class TripletSampler:
    """Draws (row, positive column, negative column) triplets of a 0/1 matrix

    The row is chosen with probability proportional to |pos| * |neg|, the
    two columns uniformly within the row. Use the transposed label matrix
    for instance-wise triplets.

    Parameters
    ----------
    y : ndarray of shape (n_rows, n_cols)
    """
    def __init__(self, y):
        y = np.asarray(y)
        counts = _pair_counts(y)
        if counts.sum() == 0:
            raise TrainingSetupError("no row has both a positive and a negative entry")
        self._cum = np.cumsum(counts)
        self._total = int(self._cum[-1])
        # CSR-like layout of positive and negative column indices per row
        self._pos_ptr, self._pos_idx = self._index_sets(y == 1)
        self._neg_ptr, self._neg_idx = self._index_sets(y == 0)

    @staticmethod
    def _index_sets(mask):
        counts = mask.sum(axis=1)
        ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        idx = np.nonzero(mask)[1].astype(np.int64)
        return ptr, idx

    def draw(self, rng, n):
        """Draw n triplets

        Returns
        -------
        rows, pos, neg : ndarray of int64, shape (n,)
        """
        # integer weights keep zero-weight rows unreachable
        rows = np.searchsorted(self._cum, rng.integers(0, self._total, size=n), side='right')
        n_pos = self._pos_ptr[rows + 1] - self._pos_ptr[rows]
        n_neg = self._neg_ptr[rows + 1] - self._neg_ptr[rows]
        pos = self._pos_idx[self._pos_ptr[rows] + rng.integers(0, n_pos)]
        neg = self._neg_idx[self._neg_ptr[rows] + rng.integers(0, n_neg)]
        return rows.astype(np.int64), pos, neg


@njit(cache=True)
def _row_dot(indptr, indices, data, row, w):
    s = 0.0
    for k in range(indptr[row], indptr[row + 1]):
        s += data[k] * w[indices[k]]
    return s


@njit(cache=True)
def _flush(wt, acc, start, col, t):
    # column `col` held its current value for iterates start[col] .. t - 1
    n = t - start[col]
    if n > 0:
        for k in range(wt.shape[1]):
            acc[col, k] += n * wt[col, k]
    start[col] = t


@njit(cache=True)
def _shrink(wt, col, factor):
    for k in range(wt.shape[1]):
        wt[col, k] *= factor


@njit(cache=True)
def _axpy_row(indptr, indices, data, row, wt, col, alpha):
    for k in range(indptr[row], indptr[row + 1]):
        wt[col, indices[k]] += alpha * data[k]


@njit(cache=True)
def _finite(wt, col):
    for k in range(wt.shape[1]):
        if not np.isfinite(wt[col, k]):
            return False
    return True


@njit(cache=True)
def sgd_kernel(indptr, indices, data, wt, acc, start, t0, lambda1, lambda2, eta,
               li, lu, lv, ij, ia, ib, use_label, use_instance):
    """Run len(li) (or len(ij)) SGD iterations in place

    Parameters
    ----------
    indptr, indices, data : CSR arrays of X
    wt : ndarray of shape (n_labels, n_features)
        current weights, transposed
    acc : ndarray of shape (n_labels, n_features)
        running sum of iterates, flushed lazily per label
    start : ndarray of int64, shape (n_labels,)
        first iterate index holding the current value of each label
    t0 : int
        global index of the first iteration of this call (1-based)
    li, lu, lv : label-wise triplets (instance, relevant, irrelevant)
    ij, ia, ib : instance-wise triplets (label, positive, negative)

    Returns
    -------
    failed : int
        0, or the iteration whose update produced a non-finite weight
    n_label, n_instance : int
        number of label-wise / instance-wise updates whose hinge fired
    """
    n_iter = li.shape[0] if use_label else ij.shape[0]
    shrink = 1.0 - eta
    n_label = 0
    n_instance = 0
    for it in range(n_iter):
        t = t0 + it
        if use_label:
            i, u, v = li[it], lu[it], lv[it]
            margin = _row_dot(indptr, indices, data, i, wt[u]) - _row_dot(indptr, indices, data, i, wt[v])
            if 1.0 - margin > 0.0:
                _flush(wt, acc, start, u, t)
                _flush(wt, acc, start, v, t)
                _shrink(wt, u, shrink)
                _shrink(wt, v, shrink)
                _axpy_row(indptr, indices, data, i, wt, u, eta * lambda1)
                _axpy_row(indptr, indices, data, i, wt, v, -eta * lambda1)
                n_label += 1
                if not (_finite(wt, u) and _finite(wt, v)):
                    return t, n_label, n_instance
        if use_instance:
            j, a, b = ij[it], ia[it], ib[it]
            margin = _row_dot(indptr, indices, data, a, wt[j]) - _row_dot(indptr, indices, data, b, wt[j])
            if 1.0 - margin > 0.0:
                _flush(wt, acc, start, j, t)
                _shrink(wt, j, shrink)
                _axpy_row(indptr, indices, data, a, wt, j, eta * lambda2)
                _axpy_row(indptr, indices, data, b, wt, j, -eta * lambda2)
                n_instance += 1
                if not _finite(wt, j):
                    return t, n_label, n_instance
    return 0, n_label, n_instance


def run_sgd(x_csr, y, w0, lambda1, lambda2, eta, iters, seed, chunk=CHUNK):
    """Averaged SGD on the hinge objective

    Parameters
    ----------
    x_csr : scipy.sparse.csr_matrix of shape (n_instances, n_features)
    y : ndarray of shape (n_instances, n_labels)
    w0 : ndarray of shape (n_features, n_labels)
        initial weights
    lambda1, lambda2 : float
        a zero weight switches the corresponding update off
    eta : float
    iters : int
    seed : int

    Returns
    -------
    w_avg : ndarray of shape (n_features, n_labels)
        mean of the iterates W^1 .. W^T
    w_last : ndarray of shape (n_features, n_labels)
    stats : dict
        number of fired label-wise and instance-wise updates
    """
    use_label = lambda1 > 0
    use_instance = lambda2 > 0
    if not (use_label or use_instance):
        raise ValueError("lambda1 and lambda2 cannot both be zero")
    label_sampler = TripletSampler(y) if use_label else None
    instance_sampler = TripletSampler(y.T) if use_instance else None
    label_rng = substream(seed, 'label_triplets')
    instance_rng = substream(seed, 'instance_triplets')

    indptr = np.asarray(x_csr.indptr, dtype=np.int64)
    indices = np.asarray(x_csr.indices, dtype=np.int64)
    data = np.asarray(x_csr.data, dtype=np.float64)
    wt = np.ascontiguousarray(w0.T, dtype=np.float64)
    acc = np.zeros_like(wt)
    start = np.ones(wt.shape[0], dtype=np.int64)
    empty = np.zeros(0, dtype=np.int64)

    stats = {'label_updates': 0, 'instance_updates': 0}
    done = 0
    while done < iters:
        n = min(chunk, iters - done)
        li, lu, lv = label_sampler.draw(label_rng, n) if use_label else (empty, empty, empty)
        ij, ia, ib = instance_sampler.draw(instance_rng, n) if use_instance else (empty, empty, empty)
        failed, n_label, n_instance = sgd_kernel(indptr, indices, data, wt, acc, start, done + 1,
                                                 float(lambda1), float(lambda2), float(eta),
                                                 li, lu, lv, ij, ia, ib, use_label, use_instance)
        stats['label_updates'] += n_label
        stats['instance_updates'] += n_instance
        if failed:
            raise NumericError(f"non-finite weight at iteration {failed}; reduce eta or the lambdas",
                               iteration=int(failed))
        done += n
        logger.debug(f"sgd: {done}/{iters} iterations, {stats['label_updates']} label-wise and "
                     f"{stats['instance_updates']} instance-wise updates")

    for col in range(wt.shape[0]):
        acc[col] += (iters + 1 - start[col]) * wt[col]
    return (acc / iters).T.copy(), wt.T.copy(), stats
