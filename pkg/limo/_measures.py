"""The eleven multi-label performance measures

Ranking measures are evaluated on a score matrix F, classification measures
on a binary prediction matrix H; both against a label matrix Y of the same
shape. Row/column averages skip degenerate rows/columns and count them.
"""
import math
from collections import OrderedDict, namedtuple
from dataclasses import dataclass, field, fields

import numpy as np

from ._data import LabelMatrix
from ._gen_utils import EvaluationError


class ScoreMatrix:
    """Real-valued predictions f_j(x_i) of shape (m, l)

    Parameters
    ----------
    scores : array-like of shape (n_instances, n_labels)
        finite reals.
    """
    def __init__(self, scores):
        arr = np.array(scores, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"score matrix needs to be 2-d, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"score matrix needs m >= 1 and l >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("score matrix contains non-finite values")
        arr.setflags(write=False)
        self._scores = arr

    @property
    def scores(self):
        return self._scores

    @property
    def shape(self):
        return self._scores.shape

    @property
    def m(self):
        return self._scores.shape[0]

    @property
    def l(self):
        return self._scores.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self._scores if dtype is None else self._scores.astype(dtype)

    def __repr__(self):
        return f"ScoreMatrix(m={self.m}, l={self.l})"


class PredictionMatrix(LabelMatrix):
    """Binary classifier output h_j(x_i) of shape (m, l)"""
    def __repr__(self):
        return f"PredictionMatrix(m={self.m}, l={self.l})"


def _scores(F):
    if isinstance(F, ScoreMatrix):
        return F.scores
    return ScoreMatrix(F).scores


def _bits(Y):
    if isinstance(Y, LabelMatrix):
        return Y.bits
    return LabelMatrix(Y).bits


def _check_shapes(a, y, what):
    if a.shape != y.shape:
        raise ValueError(f"{what} has shape {a.shape}, labels have shape {y.shape}")


def _mean(values):
    # correctly rounded, hence independent of summation order
    return math.fsum(values) / len(values)


def _ranks(f):
    "1-based descending ranks per row; ties go to the lower label index"
    order = np.argsort(-f, axis=1, kind='stable')
    ranks = np.empty(f.shape, dtype=np.int64)
    np.put_along_axis(ranks, order, np.arange(1, f.shape[1] + 1)[None, :].repeat(f.shape[0], axis=0), axis=1)
    return ranks


def _count_geq(pos, neg):
    "#{(a, b) : pos[a] >= neg[b]}"
    neg = np.sort(neg)
    return int(np.searchsorted(neg, pos, side='right').sum())


def rank_of(F, i, j):
    """1-based rank of f_j(x_i) in row i sorted descending

    Parameters
    ----------
    F : ScoreMatrix | array-like
    i : int
        row index (0-based)
    j : int
        column index (0-based)

    Returns
    -------
    rank : int
        ties are broken by ascending label index.
    """
    f = _scores(F)
    m, l = f.shape
    if not (0 <= i < m and 0 <= j < l):
        raise ValueError(f"index ({i}, {j}) out of range for shape {f.shape}")
    row = f[i]
    return int(1 + np.count_nonzero(row > row[j]) + np.count_nonzero(row[:j] == row[j]))


def hamming_loss(H, Y):
    "Fraction of misclassified (instance, label) cells"
    h = _bits(H)
    y = _bits(Y)
    _check_shapes(h, y, 'prediction matrix')
    return int(np.count_nonzero(h != y)) / h.size


def _ranking_loss(f, y):
    values = []
    for row, lab in zip(f, y):
        pos = row[lab == 1]
        neg = row[lab == 0]
        if pos.size == 0 or neg.size == 0:
            continue
        # a pair is reversed iff f_u <= f_v
        reversed_pairs = pos.size * neg.size - _count_gt(pos, neg)
        values.append(reversed_pairs / (pos.size * neg.size))
    return values, f.shape[0] - len(values)


def _count_gt(pos, neg):
    "#{(a, b) : pos[a] > neg[b]}"
    neg = np.sort(neg)
    return int(np.searchsorted(neg, pos, side='left').sum())


def _require(values, what):
    if not values:
        raise EvaluationError(f"{what} is undefined: no eligible row or column")


def ranking_loss(F, Y):
    "Average fraction of reversely ordered (relevant, irrelevant) label pairs"
    return _ranking_loss_with_skips(F, Y)[0]


def _ranking_loss_with_skips(F, Y):
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    values, skipped = _ranking_loss(f, y)
    _require(values, 'ranking loss')
    return _mean(values), skipped


def _one_error_with_skips(F, Y):
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    eligible = y.any(axis=1)
    if not eligible.any():
        raise EvaluationError("one-error is undefined: no row has a relevant label")
    top = np.argmax(f[eligible], axis=1)
    misses = np.count_nonzero(y[eligible][np.arange(top.size), top] == 0)
    return int(misses) / int(eligible.sum()), int((~eligible).sum())


def one_error(F, Y):
    "Fraction of instances whose most confident label is irrelevant"
    return _one_error_with_skips(F, Y)[0]


def _coverage_with_skips(F, Y):
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    eligible = y.any(axis=1)
    if not eligible.any():
        raise EvaluationError("coverage is undefined: no row has a relevant label")
    ranks = _ranks(f[eligible])
    worst = np.where(y[eligible] == 1, ranks, 0).max(axis=1) - 1
    return _mean([float(v) for v in worst]), int((~eligible).sum())


def coverage(F, Y):
    "Average number of steps down the ranked list needed to cover all relevant labels"
    return _coverage_with_skips(F, Y)[0]


def _average_precision_with_skips(F, Y):
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    values = []
    ranks = _ranks(f)
    for rank_row, lab in zip(ranks, y):
        pos_ranks = rank_row[lab == 1]
        if pos_ranks.size == 0:
            continue
        sorted_ranks = np.sort(pos_ranks)
        # relevant labels ranked at or above each relevant label
        above = np.searchsorted(sorted_ranks, pos_ranks, side='right')
        values.append(math.fsum(above / pos_ranks) / pos_ranks.size)
    if not values:
        raise EvaluationError("average precision is undefined: no row has a relevant label")
    return _mean(values), f.shape[0] - len(values)


def average_precision(F, Y):
    "Average fraction of relevant labels ranked above each relevant label"
    return _average_precision_with_skips(F, Y)[0]


def _f1_terms(h, y, axis):
    tp = (h & y).sum(axis=axis).astype(np.int64)
    denom = y.sum(axis=axis).astype(np.int64) + h.sum(axis=axis).astype(np.int64)
    safe = np.where(denom == 0, 1, denom)
    # empty rows/columns with no prediction count as perfect
    return np.where(denom == 0, 1.0, 2 * tp / safe)


def macro_f1(H, Y):
    "F1 averaged over labels"
    h, y = _bits(H), _bits(Y)
    _check_shapes(h, y, 'prediction matrix')
    return _mean(_f1_terms(h, y, axis=0).tolist())


def instance_f1(H, Y):
    "F1 averaged over instances"
    h, y = _bits(H), _bits(Y)
    _check_shapes(h, y, 'prediction matrix')
    return _mean(_f1_terms(h, y, axis=1).tolist())


def micro_f1(H, Y):
    "F1 of the pooled prediction matrix"
    h, y = _bits(H), _bits(Y)
    _check_shapes(h, y, 'prediction matrix')
    tp = int((h & y).sum())
    denom = int(y.sum()) + int(h.sum())
    if denom == 0:
        raise EvaluationError("micro-F1 is undefined: labels and predictions are all zero")
    return 2 * tp / denom


def _auc_terms(f, y):
    values = []
    for scores, lab in zip(f, y):
        pos = scores[lab == 1]
        neg = scores[lab == 0]
        if pos.size == 0 or neg.size == 0:
            continue
        values.append(_count_geq(pos, neg) / (pos.size * neg.size))
    return values, f.shape[0] - len(values)


def _macro_auc_with_skips(F, Y):
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    values, skipped = _auc_terms(f.T, y.T)
    _require(values, 'macro-AUC')
    return _mean(values), skipped


def macro_auc(F, Y):
    "AUC averaged over labels; ties count as correctly ordered"
    return _macro_auc_with_skips(F, Y)[0]


def _instance_auc_with_skips(F, Y):
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    values, skipped = _auc_terms(f, y)
    _require(values, 'instance-AUC')
    return _mean(values), skipped


def instance_auc(F, Y):
    "AUC averaged over instances; ties count as correctly ordered"
    return _instance_auc_with_skips(F, Y)[0]


def micro_auc(F, Y):
    """AUC over all (positive cell, negative cell) pairs of the matrix

    Counts pairs with f_i(x_a) >= f_j(x_b) in O(P log P), P = m * l.
    """
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    pos = f[y == 1]
    neg = f[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise EvaluationError("micro-AUC is undefined: labels are all positive or all negative")
    return _count_geq(pos, neg) / (pos.size * neg.size)


Measure = namedtuple('Measure', ['name', 'func', 'kind', 'higher_is_better', 'optimized_by'])

_LABEL = 'label-wise'
_INST = 'instance-wise'
_DOUBLE = 'double'

# Ordered as reported. `optimized_by` lists the effectiveness kinds that
# provably optimise the measure (micro-AUC only asymptotically).
MEASURES = OrderedDict((m.name, m) for m in (
    Measure('hamming_loss', hamming_loss, 'classification', False, frozenset((_LABEL, _INST, _DOUBLE))),
    Measure('ranking_loss', ranking_loss, 'ranking', False, frozenset((_LABEL, _DOUBLE))),
    Measure('one_error', one_error, 'ranking', False, frozenset((_LABEL, _DOUBLE))),
    Measure('coverage', coverage, 'ranking', False, frozenset((_LABEL, _DOUBLE))),
    Measure('average_precision', average_precision, 'ranking', True, frozenset((_LABEL, _DOUBLE))),
    Measure('macro_f1', macro_f1, 'classification', True, frozenset((_INST, _DOUBLE))),
    Measure('instance_f1', instance_f1, 'classification', True, frozenset((_LABEL, _DOUBLE))),
    Measure('micro_f1', micro_f1, 'classification', True, frozenset((_LABEL, _DOUBLE))),
    Measure('macro_auc', macro_auc, 'ranking', True, frozenset((_INST, _DOUBLE))),
    Measure('instance_auc', instance_auc, 'ranking', True, frozenset((_LABEL, _DOUBLE))),
    Measure('micro_auc', micro_auc, 'ranking', True, frozenset((_DOUBLE,))),
))

EFFECTIVENESS_KINDS = (_LABEL, _INST, _DOUBLE)

# measures whose average may skip degenerate rows or columns
_WITH_SKIPS = {
    'ranking_loss': _ranking_loss_with_skips,
    'one_error': _one_error_with_skips,
    'coverage': _coverage_with_skips,
    'average_precision': _average_precision_with_skips,
    'macro_auc': _macro_auc_with_skips,
    'instance_auc': _instance_auc_with_skips,
}

# classification measures evaluated on per-label (t_j) predictions; the
# rest use the per-instance (t(x)) predictions
_PER_LABEL = ('macro_f1',)


def optimized_measures(kind):
    """Measures that an effective score matrix of `kind` optimises

    Parameters
    ----------
    kind : 'label-wise' | 'instance-wise' | 'double'

    Returns
    -------
    names : list of str
        in report order.
    """
    if kind not in EFFECTIVENESS_KINDS:
        raise ValueError(f"kind={kind!r} needs to be one of {EFFECTIVENESS_KINDS}")
    return [name for name, m in MEASURES.items() if kind in m.optimized_by]


def resolve_measures(measures):
    "Normalise 'all', a comma separated string or an iterable to a list of known names"
    if measures is None or measures == 'all':
        return list(MEASURES)
    if isinstance(measures, str):
        measures = [name.strip() for name in measures.split(',') if name.strip()]
    measures = list(measures)
    unknown = [name for name in measures if name not in MEASURES]
    if unknown:
        raise ValueError(f"unknown measure(s) {unknown}; choose from {list(MEASURES)}")
    return [name for name in MEASURES if name in measures]


@dataclass
class MeasureReport:
    """Values of the eleven measures plus skip counters

    Measures that were not requested, or classification measures without a
    prediction matrix, are None.
    """
    hamming_loss: float = None
    ranking_loss: float = None
    one_error: float = None
    coverage: float = None
    average_precision: float = None
    macro_f1: float = None
    instance_f1: float = None
    micro_f1: float = None
    macro_auc: float = None
    instance_auc: float = None
    micro_auc: float = None
    skipped: dict = field(default_factory=dict)

    def values(self):
        return OrderedDict((f.name, getattr(self, f.name)) for f in fields(self) if f.name != 'skipped')

    def to_dict(self):
        "flat mapping with `<measure>_skipped` counters"
        out = OrderedDict(self.values())
        for name in _WITH_SKIPS:
            if name in self.skipped:
                out[f'{name}_skipped'] = self.skipped[name]
        return out

    @classmethod
    def from_dict(cls, d):
        skipped = {name: int(d[f'{name}_skipped']) for name in _WITH_SKIPS if f'{name}_skipped' in d}
        return cls(**{name: d.get(name) for name in MEASURES}, skipped=skipped)


def evaluate_all(F, Y, H_per_instance=None, H_per_label=None, measures='all'):
    """Evaluate the requested measures in one pass

    Parameters
    ----------
    F : ScoreMatrix | array-like of shape (m, l)
    Y : LabelMatrix | array-like of shape (m, l)
    H_per_instance : PredictionMatrix | array-like, optional
        predictions from per-instance thresholds; used for Hamming loss,
        instance-F1 and micro-F1.
    H_per_label : PredictionMatrix | array-like, optional
        predictions from per-label thresholds; used for macro-F1. Defaults
        to `H_per_instance`.
    measures : 'all' | str | iterable of str

    Returns
    -------
    report : MeasureReport
    """
    names = resolve_measures(measures)
    f, y = _scores(F), _bits(Y)
    _check_shapes(f, y, 'score matrix')
    h_inst = None if H_per_instance is None else _bits(H_per_instance)
    h_label = h_inst if H_per_label is None else _bits(H_per_label)
    for h in (h_inst, h_label):
        if h is not None:
            _check_shapes(h, y, 'prediction matrix')

    report = MeasureReport()
    for name in names:
        measure = MEASURES[name]
        if measure.kind == 'ranking':
            if name in _WITH_SKIPS:
                value, skipped = _WITH_SKIPS[name](f, y)
                report.skipped[name] = skipped
            else:
                value = measure.func(f, y)
        else:
            h = h_label if name in _PER_LABEL else h_inst
            if h is None:
                continue
            value = measure.func(h, y)
        setattr(report, name, value)
    return report
