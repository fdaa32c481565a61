import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from limo import (ConstructionError, EvaluationError, ThresholdErrorCase, average_precision, coverage, cut_errors,
                  hamming_bound, hamming_loss, induce_classifier, instance_auc, instance_f1, instance_f1_bound,
                  instance_wise_margin, is_double_effective, is_instance_wise_effective, is_label_wise_effective,
                  label_wise_margin, macro_auc, macro_f1, macro_f1_bound, make_effective_oracle,
                  make_theorem3_scores, margin_profile, micro_auc, micro_f1, micro_f1_bound, one_error,
                  ranking_loss, threshold_error)


Y1 = np.array([[1, 0, 1], [0, 1, 0]])
F1 = np.array([[0.9, 0.8, 0.3], [0.2, 0.7, 0.1]])
F_STAR = np.array([[0.9, 0.1, 0.8], [0.2, 0.7, 0.1]])


label_matrices = st.tuples(st.integers(1, 8), st.integers(1, 5)).flatmap(
    lambda shape: hnp.arrays(np.int8, shape, elements=st.integers(0, 1)))


def _or_none(measure, *args):
    try:
        return measure(*args)
    except EvaluationError:
        return None


def _oracle_or_skip(y, kind, seed):
    try:
        return make_effective_oracle(y, kind, seed)
    except ConstructionError:
        assert kind != 'double'
        return None


def test_margins_on_effective_example():
    assert label_wise_margin(F_STAR, Y1, 0) == pytest.approx(0.7)
    assert label_wise_margin(F_STAR, Y1, 1) == pytest.approx(0.5)
    assert instance_wise_margin(F_STAR, Y1, 0) == pytest.approx(0.7)
    assert instance_wise_margin(F_STAR, Y1, 1) == pytest.approx(0.6)
    assert label_wise_margin(F_STAR, [[1, 1, 1], [0, 1, 0]], 0) is None
    assert instance_wise_margin(F_STAR, [[1, 1, 0], [0, 1, 1]], 1) is None
    with pytest.raises(ValueError):
        label_wise_margin(F_STAR, Y1, 2)
    with pytest.raises(ValueError):
        instance_wise_margin(F_STAR, Y1, -1)


def test_margin_profile():
    profile = margin_profile(F_STAR, [[1, 1, 1], [0, 1, 0]])
    assert np.isnan(profile.label_wise[0])
    assert profile.label_wise[1] == pytest.approx(0.5)
    d = profile.to_dict()
    assert d['label_wise'][0] is None
    assert d['label_wise_summary'] == {'defined': 1, 'undefined': 1, 'min': pytest.approx(0.5), 'positive': 1}
    assert d['is_double_effective'] is True


def test_effectiveness_predicates():
    assert is_label_wise_effective(F_STAR, Y1)
    assert is_instance_wise_effective(F_STAR, Y1)
    assert is_double_effective(F_STAR, Y1)
    assert not is_label_wise_effective(F1, Y1)
    assert not is_double_effective(F1, Y1)
    # a zero margin is not enough
    assert not is_label_wise_effective([[0.5, 0.5]], [[1, 0]])
    assert not is_instance_wise_effective([[0.5], [0.5]], [[1], [0]])
    # no pairs at all
    assert is_double_effective(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        is_label_wise_effective(F_STAR, Y1[:, :2])


def test_threshold_error():
    assert threshold_error(ThresholdErrorCase((0.9, 0.8, 0.1), 2, 0.5)) == 0
    assert threshold_error(ThresholdErrorCase((0.9, 0.8, 0.1), 2, 0.85)) == 1
    assert threshold_error(ThresholdErrorCase((0.9, 0.8, 0.1), 2, 0.05)) == 1
    assert threshold_error(ThresholdErrorCase((0.9, 0.8, 0.1), 1, 0.05)) == 2


@pytest.mark.parametrize('scores, cut, t', [
    ((0.8, 0.9), 1, 0.5),
    ((0.9, 0.9), 1, 0.5),
    ((0.9, 0.1), 0, 0.5),
    ((0.9, 0.1), 3, 0.5),
    ((0.9, 0.1), 1, 1.95),
    ((0.9, 0.1), 1, -0.9),
    ((), 1, 0.0),
])
def test_threshold_error_case_rejects(scores, cut, t):
    with pytest.raises(ValueError):
        ThresholdErrorCase(scores, cut, t)


def test_oracles_on_worked_example():
    f = make_effective_oracle(Y1, 'double', 0)
    assert is_double_effective(f, Y1)
    assert np.all((f[Y1 == 1] > 1) & (f[Y1 == 1] < 1.49))
    assert np.all((f[Y1 == 0] >= 0) & (f[Y1 == 0] < 0.49))
    f = make_effective_oracle(Y1, 'label-wise', 0)
    assert is_label_wise_effective(f, Y1) and not is_instance_wise_effective(f, Y1)
    f = make_effective_oracle(Y1, 'instance-wise', 0)
    assert is_instance_wise_effective(f, Y1) and not is_label_wise_effective(f, Y1)
    np.testing.assert_array_equal(make_effective_oracle(Y1, 'double', 3), make_effective_oracle(Y1, 'double', 3))
    assert is_double_effective(make_effective_oracle(np.ones((3, 2)), 'double', 1), np.ones((3, 2)))


def test_oracle_construction_errors():
    with pytest.raises(ConstructionError):
        make_effective_oracle([[1, 0, 1]], 'label-wise', 0)
    with pytest.raises(ConstructionError):
        make_effective_oracle([[1], [0], [1]], 'instance-wise', 0)
    with pytest.raises(ValueError):
        make_effective_oracle(Y1, 'row-wise', 0)


def test_theorem3_scores():
    f = make_theorem3_scores(Y1, 5)
    np.testing.assert_array_equal(f, make_theorem3_scores(Y1, 5))
    assert is_double_effective(f, Y1)
    assert np.all((f > 0) & (f <= 1))
    with pytest.raises(ValueError):
        make_theorem3_scores(np.zeros((2, 2)))


@given(label_matrices, st.integers(0, 2 ** 16))
@settings(max_examples=200, deadline=None)
def test_label_wise_effectiveness_optimises_ranking_measures(y, seed):
    for kind in ('double', 'label-wise'):
        f = _oracle_or_skip(y, kind, seed)
        if f is None:
            continue
        assert is_label_wise_effective(f, y)
        for measure, best in ((ranking_loss, 0), (one_error, 0), (average_precision, 1), (instance_auc, 1)):
            value = _or_none(measure, f, y)
            assert value is None or value == best, measure.__name__
        value = _or_none(coverage, f, y)
        if value is not None:
            k = y.sum(axis=1)
            assert value == math.fsum(float(c - 1) for c in k[k > 0]) / np.count_nonzero(k)


@given(label_matrices, st.integers(0, 2 ** 16))
@settings(max_examples=200, deadline=None)
def test_instance_wise_effectiveness_optimises_macro_auc(y, seed):
    for kind in ('double', 'instance-wise'):
        f = _oracle_or_skip(y, kind, seed)
        if f is None:
            continue
        assert is_instance_wise_effective(f, y)
        assert _or_none(macro_auc, f, y) in (None, 1)


@given(label_matrices, st.integers(0, 2 ** 16))
@settings(max_examples=100, deadline=None)
def test_theorem3_scores_are_double_effective(y, seed):
    if not y.any():
        return
    f = make_theorem3_scores(y, seed)
    assert is_double_effective(f, y)


def test_micro_auc_improves_with_more_instances():
    means = []
    for m in (50, 200, 800):
        values = []
        for seed in range(20):
            y = (np.random.default_rng(seed).random((m, 10)) < 0.3).astype(int)
            values.append(micro_auc(make_theorem3_scores(y, seed), y))
        means.append(np.mean(values))
    assert means[0] <= means[1] <= means[2]
    assert means[2] >= 0.95


@given(label_matrices, st.integers(0, 2 ** 16), st.data())
@settings(max_examples=200, deadline=None)
def test_instance_threshold_error_bounds(y, seed, data):
    m, l = y.shape
    cuts = np.array(data.draw(st.lists(st.integers(0, l), min_size=m, max_size=m)), dtype=np.int64)
    for kind in ('double', 'label-wise'):
        f = _oracle_or_skip(y, kind, seed)
        if f is None:
            continue
        h = induce_classifier(f, cuts)
        eps = cut_errors(f, y, h, axis='instance')
        np.testing.assert_array_equal(eps, np.abs(cuts - y.sum(axis=1)))
        assert instance_f1(h, y) >= instance_f1_bound(y, eps) - 1e-12
        assert hamming_loss(h, y) <= hamming_bound(y, eps) + 1e-12
        value = _or_none(micro_f1, h, y)
        if value is not None:
            assert value >= micro_f1_bound(y, eps) - 1e-12


@given(label_matrices, st.integers(0, 2 ** 16), st.data())
@settings(max_examples=200, deadline=None)
def test_label_threshold_error_bounds(y, seed, data):
    m, l = y.shape
    cuts = np.array(data.draw(st.lists(st.integers(0, m), min_size=l, max_size=l)), dtype=np.int64)
    for kind in ('double', 'instance-wise'):
        f = _oracle_or_skip(y, kind, seed)
        if f is None:
            continue
        h = induce_classifier(f.T, cuts).bits.T
        eps = cut_errors(f, y, h, axis='label')
        np.testing.assert_array_equal(eps, np.abs(cuts - y.sum(axis=0)))
        assert macro_f1(h, y) >= macro_f1_bound(y, eps) - 1e-12
        assert hamming_loss(h, y) <= hamming_bound(y, eps) + 1e-12


def test_micro_f1_needs_pooled_bound():
    y = np.zeros((2, 10), dtype=int)
    y[0, 0] = 1
    y[1] = 1
    f = make_effective_oracle(y, 'double', 0)
    h = induce_classifier(f, np.array([1, 0]))
    eps = cut_errors(f, y, h)
    np.testing.assert_array_equal(eps, [0, 10])
    assert instance_f1_bound(y, eps) == pytest.approx(0.5)
    assert micro_f1(h, y) == pytest.approx(2 / 12)
    assert micro_f1_bound(y, eps) == pytest.approx(2 / 12)


def test_bound_calculators():
    assert instance_f1_bound([[1, 1, 0]], [1]) == pytest.approx(2 / 3)
    assert instance_f1_bound([[0, 0, 0]], [0]) == 1
    assert instance_f1_bound([[0, 0, 0]], [2]) == 0
    assert macro_f1_bound([[1, 0], [1, 0]], [0, 0]) == 1
    assert hamming_bound(Y1, [1, 2]) == pytest.approx(0.5)
    assert micro_f1_bound([[0, 0]], [0]) == 1
    assert micro_f1_bound([[1, 0]], [1]) == 0
    with pytest.raises(ValueError):
        instance_f1_bound(Y1, [0])
    with pytest.raises(ValueError):
        hamming_bound(Y1, [-1, 0])


def test_cut_errors_rejects_non_threshold_predictions():
    with pytest.raises(ValueError):
        cut_errors(F_STAR, Y1, [[0, 1, 0], [0, 1, 0]])
    with pytest.raises(ValueError):
        cut_errors(F_STAR, Y1, Y1, axis='diagonal')


@given(label_matrices, st.integers(0, 2 ** 16), st.lists(st.integers(-3, 3), min_size=8, max_size=8))
@settings(max_examples=100, deadline=None)
def test_effectiveness_survives_positive_scaling(y, seed, exponents):
    m, l = y.shape
    f = make_effective_oracle(y, 'double', seed)
    rows = 10.0 ** np.array(exponents[:m])[:, None]
    cols = 10.0 ** np.array(exponents[:l])[None, :]
    assert is_label_wise_effective(f * rows, y)
    assert is_instance_wise_effective(f * cols, y)
