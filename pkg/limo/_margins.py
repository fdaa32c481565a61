"""Margins, effectiveness predicates, threshold errors and score oracles

A score matrix F is label-wise effective on Y when every instance ranks all
of its relevant labels strictly above all of its irrelevant labels, and
instance-wise effective when every label ranks all of its positive
instances strictly above all of its negative instances.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._gen_utils import ConstructionError, logger, substream
from ._measures import EFFECTIVENESS_KINDS, _bits, _check_shapes, _scores


@dataclass(frozen=True, eq=False)
class MarginProfile:
    """All label-wise and instance-wise margins of (F, Y)

    Attributes
    ----------
    label_wise : ndarray of shape (m,)
        per-instance margin; NaN where a row lacks a relevant or an
        irrelevant label.
    instance_wise : ndarray of shape (l,)
        per-label margin; NaN where a column lacks a positive or a negative.
    """
    label_wise: np.ndarray
    instance_wise: np.ndarray

    @property
    def label_wise_defined(self):
        return ~np.isnan(self.label_wise)

    @property
    def instance_wise_defined(self):
        return ~np.isnan(self.instance_wise)

    @property
    def is_label_wise_effective(self):
        return bool(np.all(self.label_wise[self.label_wise_defined] > 0))

    @property
    def is_instance_wise_effective(self):
        return bool(np.all(self.instance_wise[self.instance_wise_defined] > 0))

    @property
    def is_double_effective(self):
        return self.is_label_wise_effective and self.is_instance_wise_effective

    def to_dict(self):
        def _listify(values):
            return [None if math.isnan(v) else float(v) for v in values]

        def _summary(values):
            defined = values[~np.isnan(values)]
            return {
                'defined': int(defined.size),
                'undefined': int(values.size - defined.size),
                'min': float(defined.min()) if defined.size else None,
                'positive': int(np.count_nonzero(defined > 0)),
            }

        return {
            'label_wise': _listify(self.label_wise),
            'instance_wise': _listify(self.instance_wise),
            'label_wise_summary': _summary(self.label_wise),
            'instance_wise_summary': _summary(self.instance_wise),
            'is_label_wise_effective': self.is_label_wise_effective,
            'is_instance_wise_effective': self.is_instance_wise_effective,
            'is_double_effective': self.is_double_effective,
        }


def _row_margins(f, y):
    # min_u f_u - max_v f_v equals the minimum pairwise gap (subtraction is monotone)
    pos_min = np.where(y == 1, f, np.inf).min(axis=1)
    neg_max = np.where(y == 0, f, -np.inf).max(axis=1)
    defined = np.isfinite(pos_min) & np.isfinite(neg_max)
    out = np.full(f.shape[0], np.nan)
    out[defined] = pos_min[defined] - neg_max[defined]
    return out


def _prepare(F, Y):
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    return f, y


def margin_profile(F, Y):
    """Compute every margin at once

    Parameters
    ----------
    F : ScoreMatrix | array-like of shape (m, l)
    Y : LabelMatrix | array-like of shape (m, l)

    Returns
    -------
    profile : MarginProfile
    """
    f, y = _prepare(F, Y)
    return MarginProfile(_row_margins(f, y), _row_margins(f.T, y.T))


def label_wise_margin(F, Y, i):
    """min over (relevant u, irrelevant v) of f_u(x_i) - f_v(x_i)

    Returns None when row `i` has no relevant or no irrelevant label.
    """
    f, y = _prepare(F, Y)
    if not 0 <= i < f.shape[0]:
        raise ValueError(f"row index {i} out of range for {f.shape[0]} instances")
    value = _row_margins(f[i:i + 1], y[i:i + 1])[0]
    return None if math.isnan(value) else float(value)


def instance_wise_margin(F, Y, j):
    """min over (positive a, negative b) of f_j(x_a) - f_j(x_b)

    Returns None when column `j` has no positive or no negative instance.
    """
    f, y = _prepare(F, Y)
    if not 0 <= j < f.shape[1]:
        raise ValueError(f"column index {j} out of range for {f.shape[1]} labels")
    value = _row_margins(f[:, j:j + 1].T, y[:, j:j + 1].T)[0]
    return None if math.isnan(value) else float(value)


def is_label_wise_effective(F, Y):
    return margin_profile(F, Y).is_label_wise_effective


def is_instance_wise_effective(F, Y):
    return margin_profile(F, Y).is_instance_wise_effective


def is_double_effective(F, Y):
    return margin_profile(F, Y).is_double_effective


@dataclass(frozen=True)
class ThresholdErrorCase:
    """A threshold applied to one correctly ordered score sequence

    Attributes
    ----------
    ordered_scores : tuple of float
        strictly descending x_1 > ... > x_k
    optimal_cut : int
        c* in [1, k]
    threshold : float
        t in (x_k - 1, x_1 + 1)
    """
    ordered_scores: tuple
    optimal_cut: int
    threshold: float

    def __post_init__(self):
        scores = np.asarray(self.ordered_scores, dtype=np.float64)
        object.__setattr__(self, 'ordered_scores', tuple(float(s) for s in scores))
        if scores.ndim != 1 or scores.size < 1:
            raise ValueError("ordered_scores needs at least one score")
        if not np.all(np.isfinite(scores)):
            raise ValueError("ordered_scores contains non-finite values")
        if np.any(np.diff(scores) >= 0):
            raise ValueError("ordered_scores needs to be strictly descending")
        if int(self.optimal_cut) != self.optimal_cut or not 1 <= self.optimal_cut <= scores.size:
            raise ValueError(f"optimal_cut={self.optimal_cut} needs to lie in [1, {scores.size}]")
        if not scores[-1] - 1 < self.threshold < scores[0] + 1:
            raise ValueError(f"threshold={self.threshold} needs to lie in "
                             f"({scores[-1] - 1}, {scores[0] + 1})")


def threshold_error(case):
    "|c - c*| where c counts the scores strictly above the threshold"
    c = sum(1 for s in case.ordered_scores if s > case.threshold)
    return abs(c - int(case.optimal_cut))


_AXES = {'instance': 1, 'label': 0}


def cut_errors(F, Y, H, axis='instance'):
    """Realised threshold errors of a thresholded, correctly ordered F

    Parameters
    ----------
    F : ScoreMatrix | array-like of shape (m, l)
    Y : LabelMatrix | array-like of shape (m, l)
    H : PredictionMatrix | array-like of shape (m, l)
        needs to select the top scores of every row (axis='instance') or of
        every column (axis='label') of F.
    axis : 'instance' | 'label'

    Returns
    -------
    eps : ndarray of int
        |#predicted - #relevant| per row or column. When F is effective in
        the matching sense this is the threshold error of that row/column.
    """
    if axis not in _AXES:
        raise ValueError(f"axis={axis!r} needs to be 'instance' or 'label'")
    f, y = _prepare(F, Y)
    h = _bits(H)
    _check_shapes(h, y, 'prediction matrix')
    if axis == 'label':
        f, y, h = f.T, y.T, h.T
    on_min = np.where(h == 1, f, np.inf).min(axis=1)
    off_max = np.where(h == 0, f, -np.inf).max(axis=1)
    if np.any(on_min <= off_max):
        raise ValueError(f"predictions do not threshold the scores of every {axis}")
    return np.abs(h.sum(axis=1).astype(np.int64) - y.sum(axis=1).astype(np.int64))


def _f1_bound_terms(k, eps):
    k = np.asarray(k, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if k.shape != eps.shape:
        raise ValueError(f"{eps.size} threshold errors given for {k.size} rows/columns")
    if np.any(eps < 0):
        raise ValueError("threshold errors need to be non-negative")
    over = 2 * k / np.where(k + eps > 0, 2 * k + eps, 1)
    # cutting too early is only possible for eps <= k
    feasible = eps <= k
    under = np.where(feasible, 2 * (k - eps) / np.where(feasible & (k > 0), 2 * k - eps, 1), np.inf)
    terms = np.minimum(over, under)
    # no relevant entries: perfect if nothing is predicted, else no true positive at all
    return np.where(k == 0, np.where(eps == 0, 1.0, 0.0), terms)


def instance_f1_bound(Y, eps):
    """Lower bound on instance-F1 from per-instance threshold errors

    Parameters
    ----------
    Y : LabelMatrix | array-like of shape (m, l)
    eps : array-like of shape (m,)

    Returns
    -------
    bound : float
        (1/m) sum_i min{2(k_i - e_i)/(2k_i - e_i), 2k_i/(2k_i + e_i)}, k_i = |Y+_i|
    """
    y = _bits(Y)
    return math.fsum(_f1_bound_terms(y.sum(axis=1), eps).tolist()) / y.shape[0]


def macro_f1_bound(Y, eps):
    "Lower bound on macro-F1 from per-label threshold errors; column analogue of instance_f1_bound"
    y = _bits(Y)
    return math.fsum(_f1_bound_terms(y.sum(axis=0), eps).tolist()) / y.shape[1]


def micro_f1_bound(Y, eps):
    """Lower bound on micro-F1 from pooled threshold errors

    With P relevant cells and E = sum(eps) misplaced cuts the pooled F1 is
    smallest when every error drops a relevant cell:
    max(0, 2(P - E)/(2P - E)).
    """
    y = _bits(Y)
    eps = np.asarray(eps, dtype=np.int64)
    if np.any(eps < 0):
        raise ValueError("threshold errors need to be non-negative")
    p = int(y.sum())
    e = int(eps.sum())
    if p == 0:
        return 1.0 if e == 0 else 0.0
    if e >= p:
        return 0.0
    return 2 * (p - e) / (2 * p - e)


def hamming_bound(Y, eps):
    "Upper bound on Hamming loss, sum(eps) / (m l)"
    y = _bits(Y)
    eps = np.asarray(eps, dtype=np.int64)
    if np.any(eps < 0):
        raise ValueError("threshold errors need to be non-negative")
    return int(eps.sum()) / y.size


def _double_oracle(y, rng):
    return y + rng.uniform(0.0, 0.49, size=y.shape)


def _break_one_column(f, y, rng, max_exponent=300):
    """Row-scale f by distinct powers of ten so that some column mis-orders

    Row order is untouched (positive scaling), so label-wise effectiveness
    is kept while one positive/negative pair of a column gets reversed.
    """
    m = f.shape[0]
    if m - 1 > max_exponent:
        raise ConstructionError(f"cannot give {m} rows distinct power-of-ten scales")
    exponents = rng.permutation(m)
    candidates = []
    for j in range(f.shape[1]):
        pos = np.flatnonzero(y[:, j] == 1)
        neg = np.flatnonzero((y[:, j] == 0) & (f[:, j] > 0))
        if pos.size and neg.size:
            a = pos[np.argmin(f[pos, j])]
            b = neg[np.argmax(f[neg, j])]
            candidates.append((f[a, j] / f[b, j], a, b, j))
    if not candidates:
        raise ConstructionError("no label has both a positive and a negative instance, "
                                "so every column order is vacuously correct")
    ratio, a, b, j = min(candidates)
    k = max(1, int(math.ceil(math.log10(ratio))) + 1)
    top = int(exponents.max()) + k
    if top > max_exponent:
        raise ConstructionError(f"required scale 1e{top} overflows")
    exponents[b] = top
    logger.debug(f"oracle: scaled row {b} by 1e{top} to reverse column {j}")
    return f * np.power(10.0, exponents)[:, None]


def make_effective_oracle(Y, kind='double', seed=0):
    """Score matrix with a prescribed effectiveness on Y

    Parameters
    ----------
    Y : LabelMatrix | array-like of shape (m, l)
    kind : 'double' | 'label-wise' | 'instance-wise'
        'double' gives F = Y + U(0, 0.49); the other two give a matrix that
        is effective in the named sense only.
    seed : int

    Returns
    -------
    F : ndarray of shape (m, l)

    Notes
    -----
    The result is checked with the corresponding predicates before it is
    returned; a ConstructionError signals that the requested kind cannot
    exist for Y.
    """
    if kind not in EFFECTIVENESS_KINDS:
        raise ValueError(f"kind={kind!r} needs to be one of {EFFECTIVENESS_KINDS}")
    y = _bits(Y)
    rng = substream(seed, 'oracle', EFFECTIVENESS_KINDS.index(kind))
    f = _double_oracle(y, rng)
    if kind == 'label-wise':
        f = _break_one_column(f, y, rng)
    elif kind == 'instance-wise':
        f = _break_one_column(f.T, y.T, rng).T
    profile = margin_profile(f, y)
    expected = {
        'double': (True, True),
        'label-wise': (True, False),
        'instance-wise': (False, True),
    }[kind]
    got = (profile.is_label_wise_effective, profile.is_instance_wise_effective)
    if got != expected:
        raise ConstructionError(f"{kind} oracle failed verification: "
                                f"label-wise={got[0]}, instance-wise={got[1]}")
    f.setflags(write=False)
    return f


def make_theorem3_scores(Y, seed=0):
    """Random double effective scores with uniform positives

    Positive cells are U(0, 1]. A negative cell (i, j) is U(0, b) where b is
    the smallest positive score in row i and column j, so it sits below
    every positive it is compared with. Cells whose row and column hold no
    positive at all are U(0, 1).

    Parameters
    ----------
    Y : LabelMatrix | array-like of shape (m, l)
        needs at least one positive entry.
    seed : int

    Returns
    -------
    F : ndarray of shape (m, l)
    """
    y = _bits(Y)
    if not y.any():
        raise ValueError("label matrix has no positive entry")
    rng = substream(seed, 'oracle', len(EFFECTIVENESS_KINDS))
    pos_draw = 1.0 - rng.random(y.shape)
    neg_draw = rng.random(y.shape)
    f = np.where(y == 1, pos_draw, 0.0)
    masked = np.where(y == 1, f, np.inf)
    b = np.minimum(masked.min(axis=1)[:, None], masked.min(axis=0)[None, :])
    b = np.where(np.isinf(b), 1.0, b)
    f = np.where(y == 1, f, b * neg_draw)
    f.setflags(write=False)
    return f
