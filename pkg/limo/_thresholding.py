"""Turning score matrices into predictions

Two ways of cutting F: a threshold t_j per label, calibrated column by
column on training scores, and a threshold t(x) per instance, produced by
a least-squares model over the row's sorted scores.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LinearRegression

from ._gen_utils import logger
from ._measures import PredictionMatrix, _bits, _check_shapes, _ranks, _scores


CALIBRATION_TARGETS = ('hamming_loss', 'macro_f1', 'micro_f1')
INSTANCE_MODES = ('threshold', 'cut')


@dataclass(frozen=True, eq=False)
class PerLabelThresholds:
    """Label-wise cut t_j; h_ij = [f_ij > t_j]

    Attributes
    ----------
    t : ndarray of shape (n_labels,)
    target : str
        the measure the thresholds were calibrated for
    """
    t: np.ndarray
    target: str = None

    def __post_init__(self):
        t = np.array(self.t, dtype=np.float64)
        if t.ndim != 1 or t.size < 1:
            raise ValueError(f"thresholds need shape (n_labels,), got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("thresholds contain non-finite values")
        t.setflags(write=False)
        object.__setattr__(self, 't', t)

    @property
    def l(self):
        return self.t.size

    def to_dict(self):
        return {'mode': 'per_label', 'target': self.target, 't': self.t.tolist()}


@dataclass(frozen=True, eq=False)
class InstanceThresholder:
    """Instance-wise cut predicted from the descending-sorted score row

    Attributes
    ----------
    mode : 'threshold' | 'cut'
        'threshold' regresses the score midpoint at the optimal cut and
        counts the scores above the prediction; 'cut' regresses the number
        of relevant labels and rounds.
    coef : ndarray of shape (n_labels,)
    intercept : float
    constant_cut : int | None
        set when there were too few training rows for a regression; the
        thresholder then predicts this cut for every row.
    """
    mode: str
    coef: np.ndarray
    intercept: float
    constant_cut: int = None

    def __post_init__(self):
        if self.mode not in INSTANCE_MODES:
            raise ValueError(f"mode={self.mode!r} needs to be one of {INSTANCE_MODES}")
        coef = np.array(self.coef, dtype=np.float64)
        coef.setflags(write=False)
        object.__setattr__(self, 'coef', coef)
        object.__setattr__(self, 'intercept', float(self.intercept))

    @property
    def l(self):
        return self.coef.size

    def predict_cuts(self, F):
        """Cut ĉ_i in [0, l] for every row of F"""
        f = _scores(F)
        if f.shape[1] != self.l:
            raise ValueError(f"scores have {f.shape[1]} labels, thresholder was fit on {self.l}")
        if self.constant_cut is not None:
            return np.full(f.shape[0], self.constant_cut, dtype=np.int64)
        pred = _sorted_desc(f) @ self.coef + self.intercept
        if self.mode == 'threshold':
            cuts = (f > pred[:, None]).sum(axis=1)
        else:
            cuts = np.floor(pred + 0.5)
        return np.clip(cuts, 0, self.l).astype(np.int64)

    def predict_thresholds(self, F):
        "regressed t(x_i); only meaningful in 'threshold' mode"
        if self.mode != 'threshold' or self.constant_cut is not None:
            raise ValueError("thresholder does not predict score thresholds")
        return _sorted_desc(_scores(F)) @ self.coef + self.intercept

    def to_dict(self):
        return {'mode': 'instance', 'regression': self.mode, 'coef': self.coef.tolist(),
                'intercept': self.intercept, 'constant_cut': self.constant_cut}


def _sorted_desc(f):
    return -np.sort(-f, axis=1)


def _column_candidates(scores):
    distinct = np.unique(scores)
    mids = (distinct[:-1] + distinct[1:]) / 2
    return np.concatenate(([distinct[0] - 1.0], mids, [distinct[-1] + 1.0]))


def _column_counts(scores, labels, candidates):
    "(#predicted, #true positive) for every candidate threshold, ascending"
    sorted_all = np.sort(scores)
    sorted_pos = np.sort(scores[labels == 1])
    above = scores.size - np.searchsorted(sorted_all, candidates, side='right')
    tp = sorted_pos.size - np.searchsorted(sorted_pos, candidates, side='right')
    return above, tp


def _f1(tp, denom):
    denom = np.asarray(denom)
    return np.where(denom == 0, 1.0, 2 * np.asarray(tp) / np.where(denom == 0, 1, denom))


def _last_best(values):
    "index of the last maximum; candidates are ascending so ties go to the larger threshold"
    values = np.asarray(values)
    return values.size - 1 - int(np.argmax(values[::-1]))


def calibrate_per_label(F_train, Y_train, target='macro_f1'):
    """Choose t_j from the training scores

    Parameters
    ----------
    F_train : ScoreMatrix | array-like of shape (n_instances, n_labels)
    Y_train : LabelMatrix | array-like of shape (n_instances, n_labels)
    target : 'hamming_loss' | 'macro_f1' | 'micro_f1'

    Returns
    -------
    thresholds : PerLabelThresholds

    Notes
    -----
    Candidates are the midpoints between consecutive distinct scores of a
    column plus one sentinel below the minimum and one above the maximum.
    Hamming loss and macro-F1 decompose over labels and are solved exactly.
    For micro-F1 the per-label F1 optima are refined by one greedy pass over
    the labels in order.
    """
    if target not in CALIBRATION_TARGETS:
        raise ValueError(f"target={target!r} needs to be one of {CALIBRATION_TARGETS}")
    f, y = _scores(F_train), _bits(Y_train)
    _check_shapes(f, y, 'score matrix')

    candidates, above, tp = [], [], []
    for scores, labels in zip(f.T, y.T):
        cand = _column_candidates(scores)
        a, p = _column_counts(scores, labels, cand)
        candidates.append(cand)
        above.append(a)
        tp.append(p)
    n_pos = y.sum(axis=0).astype(np.int64)

    choice = np.empty(f.shape[1], dtype=np.int64)
    for j in range(f.shape[1]):
        if target == 'hamming_loss':
            errors = (above[j] - tp[j]) + (n_pos[j] - tp[j])
            choice[j] = _last_best(-errors)
        else:
            choice[j] = _last_best(_f1(tp[j], n_pos[j] + above[j]))

    if target == 'micro_f1':
        total_tp = sum(int(tp[j][choice[j]]) for j in range(f.shape[1]))
        total_pred = sum(int(above[j][choice[j]]) for j in range(f.shape[1]))
        total_pos = int(n_pos.sum())
        for j in range(f.shape[1]):
            rest_tp = total_tp - tp[j][choice[j]]
            rest_pred = total_pred - above[j][choice[j]]
            values = _f1(rest_tp + tp[j], total_pos + rest_pred + above[j])
            best = _last_best(values)
            if values[best] > values[choice[j]]:
                choice[j] = best
            total_tp = rest_tp + tp[j][choice[j]]
            total_pred = rest_pred + above[j][choice[j]]

    t = np.array([candidates[j][choice[j]] for j in range(f.shape[1])])
    logger.debug(f"calibrated {f.shape[1]} per-label thresholds for {target}")
    return PerLabelThresholds(t, target)


def optimal_cuts(F, Y):
    """Per-row cut minimising that row's Hamming errors (ties to the smaller cut)

    Returns
    -------
    cuts : ndarray of int64, shape (n_instances,)
    """
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    order = np.argsort(-f, axis=1, kind='stable')
    y_sorted = np.take_along_axis(y, order, axis=1).astype(np.int64)
    hits = np.concatenate((np.zeros((f.shape[0], 1), dtype=np.int64), np.cumsum(y_sorted, axis=1)), axis=1)
    cuts = np.arange(f.shape[1] + 1)[None, :]
    errors = (cuts - hits) + (y_sorted.sum(axis=1, keepdims=True) - hits)
    return np.argmin(errors, axis=1).astype(np.int64)


def _gap_midpoints(sorted_desc, cuts):
    m, l = sorted_desc.shape
    # sentinels s_0 = s_1 + 1 and s_{l+1} = s_l - 1
    ext = np.concatenate((sorted_desc[:, :1] + 1.0, sorted_desc, sorted_desc[:, -1:] - 1.0), axis=1)
    rows = np.arange(m)
    return (ext[rows, cuts] + ext[rows, cuts + 1]) / 2


def fit_instance_thresholder(F_train, Y_train, mode='threshold'):
    """Least-squares cardinality model for per-instance thresholds

    Parameters
    ----------
    F_train : ScoreMatrix | array-like of shape (n_instances, n_labels)
    Y_train : LabelMatrix | array-like of shape (n_instances, n_labels)
    mode : 'threshold' | 'cut'
        'threshold' regresses the midpoint of the gap at the optimal cut
        and compares it with the scores; on double effective training
        scores it reproduces Y exactly. 'cut' regresses the integer cut
        and rounds it, which can miss rows by one even on such scores.

    Returns
    -------
    thresholder : InstanceThresholder
        With fewer than n_labels + 2 rows the regression is replaced by the
        rounded mean optimal cut.
    """
    if mode not in INSTANCE_MODES:
        raise ValueError(f"mode={mode!r} needs to be one of {INSTANCE_MODES}")
    f, y = _scores(F_train), _bits(Y_train)
    _check_shapes(f, y, 'score matrix')
    m, l = f.shape
    cuts = optimal_cuts(f, y)
    if m < l + 2:
        constant = int(math.floor(cuts.mean() + 0.5))
        msg = f"{m} training rows are too few to fit a cut model over {l} labels; predicting cut {constant}"
        logger.warning(msg)
        warnings.warn(msg, RuntimeWarning)
        return InstanceThresholder(mode, np.zeros(l), float(constant), constant)

    features = _sorted_desc(f)
    target = _gap_midpoints(features, cuts) if mode == 'threshold' else cuts.astype(np.float64)
    reg = LinearRegression().fit(features, target)
    thresholder = InstanceThresholder(mode, reg.coef_, float(reg.intercept_))
    hit_rate = float(np.mean(thresholder.predict_cuts(f) == cuts))
    logger.debug(f"instance thresholder ({mode}) recovers {hit_rate:.3f} of the training cuts")
    return thresholder


def induce_classifier(F, thresholds):
    """Binary predictions from scores

    Parameters
    ----------
    F : ScoreMatrix | array-like of shape (n_instances, n_labels)
    thresholds : PerLabelThresholds | InstanceThresholder | array-like of int
        an integer array is taken as explicit per-row cuts.

    Returns
    -------
    H : PredictionMatrix
        per-label: h_ij = [f_ij > t_j]; per-instance: the top-ĉ_i labels of
        row i (ties broken by label index) are set.
    """
    f = _scores(F)
    if isinstance(thresholds, PerLabelThresholds):
        if thresholds.l != f.shape[1]:
            raise ValueError(f"{thresholds.l} thresholds for {f.shape[1]} labels")
        return PredictionMatrix(f > thresholds.t[None, :])
    if isinstance(thresholds, InstanceThresholder):
        cuts = thresholds.predict_cuts(f)
    else:
        cuts = np.asarray(thresholds)
        if cuts.shape != (f.shape[0],) or not np.issubdtype(cuts.dtype, np.integer):
            raise ValueError(f"explicit cuts need integer shape ({f.shape[0]},), got {cuts.dtype} {cuts.shape}")
        if np.any((cuts < 0) | (cuts > f.shape[1])):
            raise ValueError(f"cuts need to lie in [0, {f.shape[1]}]")
    return PredictionMatrix(_ranks(f) <= cuts[:, None])
