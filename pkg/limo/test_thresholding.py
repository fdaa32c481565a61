import numpy as np
import pytest

from limo import (InstanceThresholder, PerLabelThresholds, calibrate_per_label, fit_instance_thresholder,
                  hamming_loss, induce_classifier, instance_f1, macro_f1, make_effective_oracle, micro_f1,
                  optimal_cuts)


Y1 = np.array([[1, 0, 1], [0, 1, 0]])
F_STAR = np.array([[0.9, 0.1, 0.8], [0.2, 0.7, 0.1]])


def _random_labels(m, l, seed, density=0.4):
    return (np.random.default_rng(seed).random((m, l)) < density).astype(int)


def test_hamming_calibration_picks_midpoint():
    th = calibrate_per_label([[0.9], [0.2]], [[1], [0]], 'hamming_loss')
    assert th.t[0] == pytest.approx(0.55)
    assert th.target == 'hamming_loss'


def test_constant_column_uses_sentinel():
    f = np.full((3, 1), 0.5)
    y = np.array([[1], [1], [0]])
    th = calibrate_per_label(f, y, 'hamming_loss')
    assert th.t[0] < 0.5
    assert hamming_loss(induce_classifier(f, th), y) == pytest.approx(1 / 3)


@pytest.mark.parametrize('target', ['hamming_loss', 'macro_f1', 'micro_f1'])
def test_separable_columns_reach_the_optimum(target):
    y = _random_labels(60, 5, 1)
    f = make_effective_oracle(y, 'double', 1)
    h = induce_classifier(f, calibrate_per_label(f, y, target))
    assert hamming_loss(h, y) == 0
    assert macro_f1(h, y) == 1


def test_micro_f1_pass_never_loses():
    rng = np.random.default_rng(4)
    y = _random_labels(80, 6, 4)
    f = y + rng.normal(0, 0.8, size=y.shape)
    by_macro = induce_classifier(f, calibrate_per_label(f, y, 'macro_f1'))
    by_micro = induce_classifier(f, calibrate_per_label(f, y, 'micro_f1'))
    assert micro_f1(by_micro, y) >= micro_f1(by_macro, y)


def test_calibration_argument_errors():
    with pytest.raises(ValueError):
        calibrate_per_label(F_STAR, Y1, 'ranking_loss')
    with pytest.raises(ValueError):
        calibrate_per_label(F_STAR, Y1[:, :2])


def test_optimal_cuts():
    np.testing.assert_array_equal(optimal_cuts(F_STAR, Y1), [2, 1])
    np.testing.assert_array_equal(optimal_cuts([[0.3, 0.2]], [[0, 0]]), [0])
    # one relevant label at the bottom: taking nothing and taking everything cost the same
    np.testing.assert_array_equal(optimal_cuts([[0.9, 0.1]], [[0, 1]]), [0])


def test_instance_thresholder_recovers_cuts():
    y = _random_labels(300, 6, 2)
    f = make_effective_oracle(y, 'double', 2)
    th = fit_instance_thresholder(f, y)
    assert th.mode == 'threshold' and th.constant_cut is None
    cuts = th.predict_cuts(f)
    assert np.all((cuts >= 0) & (cuts <= 6))
    assert np.mean(cuts == y.sum(axis=1)) >= 0.95


@pytest.mark.parametrize('mode', ['threshold', 'cut'])
def test_constant_cardinality(mode):
    rng = np.random.default_rng(3)
    y = np.zeros((40, 5), dtype=int)
    for row in y:
        row[rng.choice(5, size=2, replace=False)] = 1
    f = make_effective_oracle(y, 'double', 3)
    th = fit_instance_thresholder(f, y, mode)
    np.testing.assert_array_equal(th.predict_cuts(f), np.full(40, 2))


def test_single_label():
    y = _random_labels(50, 1, 5, density=0.5)
    f = make_effective_oracle(y, 'double', 5)
    cuts = fit_instance_thresholder(f, y).predict_cuts(f)
    assert set(cuts.tolist()) <= {0, 1}
    assert np.mean(cuts == y[:, 0]) >= 0.95


def test_too_few_rows_fall_back_to_mean_cut():
    with pytest.warns(RuntimeWarning, match='too few'):
        th = fit_instance_thresholder(F_STAR, Y1)
    assert th.constant_cut == 2
    np.testing.assert_array_equal(th.predict_cuts(F_STAR), [2, 2])
    with pytest.raises(ValueError):
        th.predict_thresholds(F_STAR)


def test_double_effective_scores_with_gap_threshold():
    # positives lie above 1 and negatives below 0.49 in the oracle
    y = _random_labels(100, 5, 6)
    f = make_effective_oracle(y, 'double', 6)
    th = InstanceThresholder('threshold', np.zeros(5), 0.745)
    h = induce_classifier(f, th)
    assert instance_f1(h, y) == 1
    assert hamming_loss(h, y) == 0


@pytest.mark.parametrize('seed', range(20))
def test_fitted_thresholder_classifies_double_effective_scores(seed):
    y = _random_labels(60, 6, seed)
    f = make_effective_oracle(y, 'double', seed)
    h = induce_classifier(f, fit_instance_thresholder(f, y))
    assert instance_f1(h, y) == 1
    assert hamming_loss(h, y) == 0


def test_induce_classifier():
    np.testing.assert_array_equal(induce_classifier(F_STAR, np.array([2, 1])).bits, Y1)
    above = PerLabelThresholds([1.0, 1.0, 1.0])
    below = PerLabelThresholds([0.0, 0.0, 0.0])
    np.testing.assert_array_equal(induce_classifier(F_STAR, above).bits, np.zeros((2, 3)))
    np.testing.assert_array_equal(induce_classifier(F_STAR, below).bits, np.ones((2, 3)))
    # ties go to the lower label index
    np.testing.assert_array_equal(induce_classifier([[0.5, 0.5, 0.5]], np.array([2])).bits, [[1, 1, 0]])


@pytest.mark.parametrize('thresholds', [
    PerLabelThresholds([0.5, 0.5]),
    np.array([1, 4]),
    np.array([1.0, 2.0]),
    np.array([1, 2, 0]),
])
def test_induce_classifier_rejects(thresholds):
    with pytest.raises(ValueError):
        induce_classifier(F_STAR, thresholds)


def test_instance_induction_ignores_monotone_row_transforms():
    y = _random_labels(30, 6, 7)
    f = make_effective_oracle(y, 'label-wise', 7)
    cuts = np.random.default_rng(7).integers(0, 7, size=30)
    transformed = 4.0 * np.log1p(f) - 1.0
    np.testing.assert_array_equal(induce_classifier(f, cuts).bits, induce_classifier(transformed, cuts).bits)


def test_threshold_containers():
    with pytest.raises(ValueError):
        PerLabelThresholds([0.1, np.inf])
    with pytest.raises(ValueError):
        InstanceThresholder('rank', [0.0], 0.0)
    th = InstanceThresholder('cut', [0.0, 0.0, 0.0], 1.4)
    np.testing.assert_array_equal(th.predict_cuts(F_STAR), [1, 1])
    assert th.to_dict()['regression'] == 'cut'
    assert PerLabelThresholds([0.2], 'macro_f1').to_dict() == {'mode': 'per_label', 'target': 'macro_f1',
                                                               't': [0.2]}
    with pytest.raises(ValueError):
        th.predict_cuts([[0.1, 0.2]])
    with pytest.raises(ValueError):
        fit_instance_thresholder(F_STAR, Y1, mode='rank')
