import numpy as np
import pytest
from scipy import sparse

from limo import (Dataset, NumericError, SplitSpec, TrainingSetupError, predict_scores, ranking_loss, split,
                  synth_quadrant)
from limo._gen_utils import substream
from limo.opt import (LIMO, LinearModel, TrainConfig, TripletSampler, add_bias_column, full_subgradient,
                      objective_terms, objective_value, sampling_weights, subgradient_terms, train)


Y1 = np.array([[1, 0, 1], [0, 1, 0]])
X1 = np.eye(2)


def linear_problem(m=60, d=5, l=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, d))
    y = (x @ rng.standard_normal((d, l)) > 0).astype(int)
    return Dataset(x, y)


def brute_objective(w, x, y, lambda1, lambda2):
    s = x @ w
    total = float(np.sum(w * w))
    for i in range(y.shape[0]):
        for u in np.flatnonzero(y[i] == 1):
            for v in np.flatnonzero(y[i] == 0):
                total += lambda1 * max(0.0, 1.0 - (s[i, u] - s[i, v]))
    for j in range(y.shape[1]):
        for a in np.flatnonzero(y[:, j] == 1):
            for b in np.flatnonzero(y[:, j] == 0):
                total += lambda2 * max(0.0, 1.0 - (s[a, j] - s[b, j]))
    return total


def brute_subgradient(w, x, y, lambda1, lambda2):
    s = x @ w
    g = 2 * w
    for i in range(y.shape[0]):
        for u in np.flatnonzero(y[i] == 1):
            for v in np.flatnonzero(y[i] == 0):
                if 1.0 - (s[i, u] - s[i, v]) > 0:
                    g[:, u] -= lambda1 * x[i]
                    g[:, v] += lambda1 * x[i]
    for j in range(y.shape[1]):
        for a in np.flatnonzero(y[:, j] == 1):
            for b in np.flatnonzero(y[:, j] == 0):
                if 1.0 - (s[a, j] - s[b, j]) > 0:
                    g[:, j] += lambda2 * (x[b] - x[a])
    return g


def _fit_scalar(est, target):
    a = float(np.sum(est * target) / np.sum(est * est))
    residual = np.linalg.norm(a * est - target) / np.linalg.norm(target)
    return a, residual


def test_sampling_weights():
    weights = sampling_weights(Y1)
    np.testing.assert_allclose(weights.per_instance, [0.5, 0.5])
    np.testing.assert_allclose(weights.per_label, [1 / 3, 1 / 3, 1 / 3])
    weights = sampling_weights([[1, 1], [1, 0], [0, 1]])
    assert weights.per_instance[0] == 0
    assert weights.per_instance.sum() == pytest.approx(1)
    assert sampling_weights(Y1, instance_wise=False).per_label is None


def test_sampling_weights_setup_errors():
    with pytest.raises(TrainingSetupError):
        sampling_weights(np.ones((3, 2)))
    with pytest.raises(TrainingSetupError, match='label'):
        sampling_weights([[1, 0], [1, 0]])
    sampling_weights([[1, 0], [1, 0]], instance_wise=False)


def test_objective_special_points():
    assert objective_value(np.zeros((2, 3)), X1, Y1, 2.0, 3.0) == 2.0 * 4 + 3.0 * 3
    w = 2.0 * np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    assert objective_terms(w, X1, Y1) == (12.0, 0.0, 0.0)
    np.testing.assert_array_equal(full_subgradient(w, X1, Y1, 5.0, 5.0), 2 * w)


def test_single_active_pair():
    # only the label pair (0, 1) on x_0 has a small margin
    w = np.array([[0.5, 0.0], [0.0, 3.0]])
    _, phi1, phi2 = subgradient_terms(w, X1, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(phi1, [[-1.0, 1.0], [0.0, 0.0]])


@pytest.mark.parametrize('seed', range(5))
def test_objective_matches_pair_enumeration(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((9, 3))
    y = (rng.random((9, 4)) < 0.4).astype(int)
    w = rng.normal(0, 0.5, size=(3, 4))
    expected = brute_objective(w, x, y, 1.3, 0.7)
    assert objective_value(w, x, y, 1.3, 0.7) == pytest.approx(expected, rel=1e-10)
    assert objective_value(w, sparse.csr_matrix(x), y, 1.3, 0.7) == pytest.approx(expected, rel=1e-10)
    np.testing.assert_allclose(full_subgradient(w, x, y, 1.3, 0.7), brute_subgradient(w, x, y, 1.3, 0.7),
                               rtol=1e-10, atol=1e-12)


def test_subgradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((12, 3))
    y = (rng.random((12, 4)) < 0.5).astype(int)
    w = rng.normal(0, 0.5, size=(3, 4))
    g = full_subgradient(w, x, y, 1.0, 0.5)
    h = 1e-6
    for _ in range(5):
        direction = rng.standard_normal(w.shape)
        numeric = (objective_value(w + h * direction, x, y, 1.0, 0.5) -
                   objective_value(w - h * direction, x, y, 1.0, 0.5)) / (2 * h)
        assert numeric == pytest.approx(np.sum(g * direction), rel=1e-5)


def test_objective_shape_errors():
    with pytest.raises(ValueError):
        objective_value(np.zeros((3, 3)), X1, Y1, 1.0, 1.0)
    with pytest.raises(ValueError):
        full_subgradient(np.zeros((2, 2)), X1, Y1, 1.0, 1.0)


def test_sampler_skips_degenerate_rows():
    y = np.array([[1, 1, 1], [1, 0, 0], [0, 0, 0], [1, 1, 0], [0, 1, 0]])
    rows, pos, neg = TripletSampler(y).draw(substream(0, 'label_triplets'), 100000)
    assert not np.isin(rows, [0, 2]).any()
    assert np.all(y[rows, pos] == 1) and np.all(y[rows, neg] == 0)
    freq = np.bincount(rows, minlength=5) / rows.size
    np.testing.assert_allclose(freq, sampling_weights(y, instance_wise=False).per_instance, atol=0.01)


def test_stochastic_directions_are_unbiased():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((20, 3))
    y = (rng.random((20, 4)) < 0.5).astype(int)
    w = rng.normal(0, 0.3, size=(3, 4))
    reg, phi1, phi2 = subgradient_terms(w, x, y)
    scores = x @ w
    n = 10 ** 6

    rows, pos, neg = TripletSampler(y).draw(substream(1, 'label_triplets'), n)
    active = (1.0 - (scores[rows, pos] - scores[rows, neg]) > 0).astype(float)
    coef = np.zeros(y.shape)
    np.add.at(coef, (rows, pos), -active)
    np.add.at(coef, (rows, neg), active)
    scale, residual = _fit_scalar(x.T @ coef / n, phi1)
    n_pairs = int(np.sum(y.sum(axis=1) * (4 - y.sum(axis=1))))
    assert residual < 0.05
    assert scale == pytest.approx(n_pairs, rel=0.05)

    # shrinks only happen on active pairs, so the regularizer is matched column by column
    hits = np.bincount(pos, weights=active, minlength=4) + np.bincount(neg, weights=active, minlength=4)
    est_reg = w * hits / n
    for k in range(4):
        scale, residual = _fit_scalar(est_reg[:, k], reg[:, k])
        assert scale > 0 and residual < 1e-12

    cols, a, b = TripletSampler(y.T).draw(substream(1, 'instance_triplets'), n)
    active = (1.0 - (scores[a, cols] - scores[b, cols]) > 0).astype(float)
    coef = np.zeros(y.T.shape)
    np.add.at(coef, (cols, a), -active)
    np.add.at(coef, (cols, b), active)
    scale, residual = _fit_scalar(x.T @ coef.T / n, phi2)
    n_pairs = int(np.sum(y.sum(axis=0) * (20 - y.sum(axis=0))))
    assert residual < 0.05
    assert scale == pytest.approx(n_pairs, rel=0.05)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(-1.0, 1.0, 0.1, 10)
    with pytest.raises(ValueError):
        TrainConfig(0.0, 0.0, 0.1, 10)
    with pytest.raises(ValueError):
        TrainConfig(1.0, 1.0, 0.0, 10)
    with pytest.raises(ValueError):
        TrainConfig(1.0, 1.0, 0.1, 0)
    with pytest.raises(ValueError):
        TrainConfig(1.0, float('nan'), 0.1, 10)
    with pytest.raises(ValueError):
        TrainConfig(1.0, 1.0, 0.1, 10, fit_intercept='yes')
    assert TrainConfig(1.0, 1.0, 0.1, 10).fit_intercept
    assert TrainConfig.for_variant('LIMO-inst', 10, 0.1, 5) == TrainConfig(0.0, 10, 0.1, 5)
    with pytest.raises(ValueError):
        TrainConfig.for_variant('LIMO-both', 10, 0.1, 5)


def test_training_is_deterministic():
    data = linear_problem()
    cfg = TrainConfig(1.0, 1.0, 0.01, 5000, seed=3)
    first = train(data, cfg)
    assert first.weights.tobytes() == train(data, cfg).weights.tobytes()
    other = train(data, TrainConfig(1.0, 1.0, 0.01, 5000, seed=4))
    assert not np.array_equal(first.weights, other.weights)


def test_single_sided_variants():
    rows_only = Dataset(np.random.default_rng(0).standard_normal((6, 2)), [[1, 0]] * 6)
    with pytest.raises(TrainingSetupError):
        train(rows_only, TrainConfig(1.0, 1.0, 0.01, 100))
    model = train(rows_only, TrainConfig.for_variant('LIMO-label', 1.0, 0.01, 100))
    assert model.weights.shape == (2, 2)
    assert model.bias.shape == (2,)

    cols_only = Dataset(np.random.default_rng(1).standard_normal((4, 2)), [[1, 1], [0, 0], [1, 1], [0, 0]])
    with pytest.raises(TrainingSetupError):
        train(cols_only, TrainConfig(1.0, 1.0, 0.01, 100))
    assert np.all(np.isfinite(train(cols_only, TrainConfig.for_variant('LIMO-inst', 1.0, 0.01, 100)).weights))


def test_training_improves_ranking():
    data = linear_problem(m=200, seed=5)
    model = train(data, TrainConfig(1.0, 1.0, 0.01, 20000, seed=0))
    assert ranking_loss(predict_scores(model, data), data.labels) < 0.1


def threshold_problem(m=400, seed=0):
    # label 0 is relevant for x > -0.5, label 1 otherwise
    x = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(m, 1))
    y = np.hstack((x > -0.5, x <= -0.5)).astype(int)
    return Dataset(x, y)


def test_intercept_moves_the_decision_boundary():
    data = threshold_problem()
    with_bias = train(data, TrainConfig.for_variant('LIMO-label', 100.0, 0.01, 20000))
    without = train(data, TrainConfig.for_variant('LIMO-label', 100.0, 0.01, 20000, fit_intercept=False))
    np.testing.assert_array_equal(without.bias, [0.0, 0.0])
    assert ranking_loss(predict_scores(with_bias, data), data.labels) < 0.1
    # a boundary through the origin misranks every row with x in (-0.5, 0)
    assert ranking_loss(predict_scores(without, data), data.labels) > 0.15


def test_divergence_names_the_iteration():
    data = linear_problem(m=20)
    with pytest.raises(NumericError) as info:
        train(data, TrainConfig(1e200, 1e200, 1e200, 100))
    assert info.value.iteration >= 1


def test_predict_scores():
    model = LinearModel(np.array([[2.0, -1.0]]), bias=[0.5, 1.0])
    np.testing.assert_array_equal(predict_scores(model, [[1.0], [0.0]]).scores, [[2.5, 0.0], [0.5, 1.0]])
    np.testing.assert_array_equal(model.augmented_weights, [[2.0, -1.0], [0.5, 1.0]])
    np.testing.assert_array_equal(add_bias_column(sparse.csr_matrix([[3.0]])).toarray(), [[3.0, 1.0]])
    with pytest.raises(ValueError):
        LinearModel(np.zeros((1, 2)), bias=[0.0])
    model = LinearModel(np.array([[3.0]]))
    assert predict_scores(model, [[2.0]]).scores[0, 0] == 6
    model = LinearModel(np.array([[1.0, 0.0], [0.0, 2.0]]))
    np.testing.assert_array_equal(predict_scores(model, X1).scores, [[1.0, 0.0], [0.0, 2.0]])
    np.testing.assert_array_equal(predict_scores(model, sparse.csr_matrix([[1.0, 1.0]])).scores, [[1.0, 2.0]])
    np.testing.assert_array_equal(predict_scores(LinearModel(np.zeros((2, 3))), X1).scores, np.zeros((2, 3)))
    with pytest.raises(ValueError):
        predict_scores(model, [[1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        LinearModel([[np.inf]])


def test_estimator_round_trip(tmp_path):
    data = linear_problem()
    est = LIMO(iters=3000, seed=1).fit(data.features, data.labels)
    path = tmp_path / 'model.npz'
    est.model_.save(path)
    model = LinearModel.load(path)
    np.testing.assert_array_equal(model.weights, est.model_.weights)
    np.testing.assert_array_equal(model.bias, est.model_.bias)
    assert model.config == est.config
    assert set(model.thresholds) == {'t', 't(x)'}
    np.testing.assert_array_equal(model.thresholds['t'].t, est.model_.thresholds['t'].t)
    assert model.thresholds['t'].target == 'macro_f1'
    np.testing.assert_array_equal(model.thresholds['t(x)'].coef, est.model_.thresholds['t(x)'].coef)
    assert model.thresholds['t(x)'].intercept == est.model_.thresholds['t(x)'].intercept
    loaded = LIMO()
    loaded.model_ = model
    for thresholding in ('t', 't(x)'):
        np.testing.assert_array_equal(loaded.predict(data.features, thresholding),
                                      est.predict(data.features, thresholding))


def test_model_format_version(tmp_path):
    path = tmp_path / 'old.npz'
    np.savez(path, format_version=np.array(0), weights=np.zeros((1, 1)), config=np.array('null'),
             thresholds=np.array('{}'))
    with pytest.raises(ValueError, match='version'):
        LinearModel.load(path)


def test_estimator_api():
    est = LIMO.variant('LIMO-label', lam=10, iters=500)
    assert (est.config.lambda1, est.config.lambda2) == (10, 0.0)
    with pytest.raises(RuntimeError):
        est.predict(X1)
    data = linear_problem()
    est.fit(data.features.toarray(), data.labels.bits)
    assert est.decision_function(data.features).shape == (60, 4)
    assert est.predict(data.features).shape == (60, 4)
    with pytest.raises(ValueError):
        est.predict(data.features, thresholding='t:hamming_loss')


@pytest.mark.slow
def test_quadrant_ranking_loss():
    data = synth_quadrant(2000, 0)
    train_set, test_set = split(data, SplitSpec(0.7, 0))
    model = train(train_set, TrainConfig(100.0, 100.0, 0.01, 200000, seed=0))
    assert ranking_loss(predict_scores(model, test_set), test_set.labels) < 0.05


@pytest.mark.slow
def test_objective_descends():
    data = synth_quadrant(400, 1)
    early, late = [], []
    for seed in range(10):
        for iters, out in ((2000, early), (20000, late)):
            model = train(data, TrainConfig(100.0, 100.0, 0.01, iters, seed))
            out.append(objective_value(model.augmented_weights, add_bias_column(data), data.labels, 100.0, 100.0))
    assert np.median(late) < np.median(early)
