import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse

from .._data import Dataset, FeatureMatrix, LabelMatrix
from .._gen_utils import logger, substream
from .._measures import ScoreMatrix
from .._thresholding import (InstanceThresholder, PerLabelThresholds, calibrate_per_label,
                             fit_instance_thresholder, induce_classifier)
from .sgd import run_sgd, sampling_weights


FORMAT_VERSION = 2

# variant -> (label-wise term on, instance-wise term on)
VARIANTS = {
    'LIMO': (True, True),
    'LIMO-label': (True, False),
    'LIMO-inst': (False, True),
}

# default threshold pairing per variant
DEFAULT_PAIRING = {
    'LIMO': ('t(x)', 't'),
    'LIMO-label': ('t(x)',),
    'LIMO-inst': ('t',),
}


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one training run

    Parameters
    ----------
    lambda1 : float
        weight of the label-wise hinge term, >= 0
    lambda2 : float
        weight of the instance-wise hinge term, >= 0
    eta : float
        step size, > 0
    iters : int
        number of SGD iterations T, >= 1
    seed : int
    fit_intercept : bool
        learn a per-label bias b_j, so that F(X) = X W + b. The bias is
        trained as the weight of a constant-1 feature and is regularized
        with the other weights.
    """
    lambda1: float
    lambda2: float
    eta: float
    iters: int
    seed: int = 0
    fit_intercept: bool = True

    def __post_init__(self):
        for name in ('lambda1', 'lambda2', 'eta'):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name}={value} needs to be finite")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError(f"lambda1={self.lambda1}, lambda2={self.lambda2} need to be non-negative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ValueError("lambda1 and lambda2 cannot both be zero")
        if self.eta <= 0:
            raise ValueError(f"eta={self.eta} needs to be positive")
        if int(self.iters) != self.iters or self.iters < 1:
            raise ValueError(f"iters={self.iters} needs to be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed={self.seed} needs to be a non-negative integer")
        if not isinstance(self.fit_intercept, bool):
            raise ValueError(f"fit_intercept={self.fit_intercept!r} needs to be a bool")

    @classmethod
    def for_variant(cls, variant, lam, eta, iters, seed=0, fit_intercept=True):
        """Config of a named variant with trade-off `lam` on its active terms"""
        if variant not in VARIANTS:
            raise ValueError(f"variant={variant!r} needs to be one of {list(VARIANTS)}")
        use_label, use_instance = VARIANTS[variant]
        return cls(lam if use_label else 0.0, lam if use_instance else 0.0, eta, iters, seed, fit_intercept)

    def to_dict(self):
        return asdict(self)


class LinearModel:
    """Linear scorer F(X) = X W + b

    Parameters
    ----------
    weights : ndarray of shape (n_features, n_labels)
    config : TrainConfig | None
    thresholds : dict, optional
        calibrated thresholders keyed by name (e.g. 't(x)', 't:macro_f1').
    bias : ndarray of shape (n_labels,), optional
        per-label intercept; zeros when omitted.
    """
    def __init__(self, weights, config=None, thresholds=None, bias=None):
        weights = np.array(weights, dtype=np.float64)
        if weights.ndim != 2:
            raise ValueError(f"weights need to be 2-d, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights contain non-finite values")
        bias = np.zeros(weights.shape[1]) if bias is None else np.array(bias, dtype=np.float64)
        if bias.shape != (weights.shape[1],):
            raise ValueError(f"bias has shape {bias.shape}, expected {(weights.shape[1],)}")
        if not np.all(np.isfinite(bias)):
            raise ValueError("bias contains non-finite values")
        weights.setflags(write=False)
        bias.setflags(write=False)
        self.weights = weights
        self.bias = bias
        self.config = config
        self.thresholds = dict(thresholds or {})

    @property
    def d(self):
        return self.weights.shape[0]

    @property
    def l(self):
        return self.weights.shape[1]

    @property
    def augmented_weights(self):
        "W with b appended as its last row, the weights seen by `add_bias_column` features"
        return np.vstack((self.weights, self.bias))

    def __repr__(self):
        return f"LinearModel(d={self.d}, l={self.l})"

    def save(self, path):
        """Write a versioned .npz archive"""
        arrays = {
            'format_version': np.array(FORMAT_VERSION),
            'weights': np.ascontiguousarray(self.weights),
            'bias': np.ascontiguousarray(self.bias),
            'config': np.array(json.dumps(None if self.config is None else self.config.to_dict())),
        }
        meta = {}
        for name, th in self.thresholds.items():
            key = f'th{len(meta)}'
            if isinstance(th, PerLabelThresholds):
                meta[key] = {'name': name, 'mode': 'per_label', 'target': th.target}
                arrays[f'{key}_t'] = th.t
            else:
                meta[key] = {'name': name, 'mode': 'instance', 'regression': th.mode,
                             'intercept': th.intercept, 'constant_cut': th.constant_cut}
                arrays[f'{key}_coef'] = th.coef
        arrays['thresholds'] = np.array(json.dumps(meta, sort_keys=True))
        with open(path, 'wb') as fp:
            np.savez(fp, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as npz:
            version = int(npz['format_version'])
            if version != FORMAT_VERSION:
                raise ValueError(f"{path}: model format version {version}, expected {FORMAT_VERSION}")
            weights = npz['weights']
            bias = npz['bias']
            config = json.loads(str(npz['config']))
            meta = json.loads(str(npz['thresholds']))
            thresholds = {}
            for key in sorted(meta):
                item = meta[key]
                if item['mode'] == 'per_label':
                    thresholds[item['name']] = PerLabelThresholds(npz[f'{key}_t'], item['target'])
                else:
                    thresholds[item['name']] = InstanceThresholder(item['regression'], npz[f'{key}_coef'],
                                                                   item['intercept'], item['constant_cut'])
        return cls(weights, None if config is None else TrainConfig(**config), thresholds, bias)


def _features(X):
    if isinstance(X, Dataset):
        return X.features
    if isinstance(X, FeatureMatrix):
        return X
    return FeatureMatrix(X)


def add_bias_column(X):
    """Append a constant-1 feature; CSR input stays CSR

    Parameters
    ----------
    X : Dataset | FeatureMatrix | array-like | scipy.sparse matrix

    Returns
    -------
    features : FeatureMatrix of shape (n_instances, n_features + 1)
    """
    features = _features(X)
    ones = np.ones((features.m, 1))
    if features.is_sparse:
        return FeatureMatrix(sparse.hstack((features.values, ones), format='csr'))
    return FeatureMatrix(np.hstack((features.values, ones)))


def train(data, cfg):
    """Averaged stochastic subgradient descent on the hinge objective

    Each iteration (when lambda1 > 0) draws an instance with probability
    proportional to |Y+_i||Y-_i|, one relevant and one irrelevant label
    uniformly, and if the pair violates the unit margin updates

        w_u <- w_u - eta (-lambda1 x_i + w_u),  w_v <- w_v - eta (lambda1 x_i + w_v);

    then (when lambda2 > 0) draws a label proportionally to
    |Y+_j||Y-_j|, a positive and a negative instance uniformly, and on a
    violation updates w_j <- w_j - eta (lambda2 (x_b - x_a) + w_j).

    Parameters
    ----------
    data : Dataset
    cfg : TrainConfig

    Returns
    -------
    model : LinearModel
        weights are the mean of the T post-update iterates. With
        `cfg.fit_intercept` the last row of the averaged iterate becomes
        the bias.
    """
    sampling_weights(data.labels, label_wise=cfg.lambda1 > 0, instance_wise=cfg.lambda2 > 0)
    features = add_bias_column(data) if cfg.fit_intercept else data.features
    d, l = features.d, data.l
    w0 = substream(cfg.seed, 'init').normal(0.0, 1.0 / math.sqrt(d), size=(d, l))
    logger.info(f"LIMO training: m={data.m}, d={data.d}, l={l}, lambda1={cfg.lambda1}, "
                f"lambda2={cfg.lambda2}, eta={cfg.eta}, T={cfg.iters}, seed={cfg.seed}, "
                f"fit_intercept={cfg.fit_intercept}")
    t0 = time.perf_counter()
    w_avg, _, stats = run_sgd(features.tocsr(), data.labels.bits, w0, cfg.lambda1, cfg.lambda2,
                              cfg.eta, cfg.iters, cfg.seed)
    logger.info(f"LIMO training done in {time.perf_counter() - t0:.2f}s: "
                f"{stats['label_updates']} label-wise, {stats['instance_updates']} instance-wise updates")
    if cfg.fit_intercept:
        return LinearModel(w_avg[:-1], cfg, bias=w_avg[-1])
    return LinearModel(w_avg, cfg)


def predict_scores(model, X):
    """F(X) = X W + b

    Parameters
    ----------
    model : LinearModel
    X : Dataset | FeatureMatrix | array-like | scipy.sparse matrix

    Returns
    -------
    F : ScoreMatrix
    """
    features = _features(X)
    if features.d != model.d:
        raise ValueError(f"X has {features.d} features, model expects {model.d}")
    return ScoreMatrix(np.asarray(features.values @ model.weights) + model.bias)


class LIMO:
    """Multi-label linear ranker with label-wise and instance-wise margins

    Parameters
    ----------
    lambda1 : float, default=1.0
    lambda2 : float, default=1.0
    eta : float, default=0.01
    iters : int, default=100000
    seed : int, default=0
    per_label_target : str, default='macro_f1'
        measure the label-wise thresholds t_j are calibrated for
    instance_mode : 'threshold' | 'cut', default='threshold'
    fit_intercept : bool, default=True

    Examples
    --------
    >>> est = LIMO.variant('LIMO-label', lam=100, iters=20000).fit(X, Y)
    >>> H = est.predict(X_test, thresholding='t(x)')
    """
    model_ = None

    def __init__(self, lambda1=1.0, lambda2=1.0, eta=0.01, iters=100000, seed=0,
                 per_label_target='macro_f1', instance_mode='threshold', fit_intercept=True):
        self.config = TrainConfig(lambda1, lambda2, eta, iters, seed, fit_intercept)
        self.per_label_target = per_label_target
        self.instance_mode = instance_mode

    @classmethod
    def variant(cls, name, lam=1.0, eta=0.01, iters=100000, seed=0, **kwargs):
        cfg = TrainConfig.for_variant(name, lam, eta, iters, seed)
        return cls(cfg.lambda1, cfg.lambda2, cfg.eta, cfg.iters, cfg.seed, **kwargs)

    def fit(self, X, Y):
        """Train the weights, then calibrate both thresholders on the training scores

        Parameters
        ----------
        X : FeatureMatrix | array-like | scipy.sparse matrix of shape (n_instances, n_features)
        Y : LabelMatrix | array-like of shape (n_instances, n_labels)
        """
        data = Dataset(_features(X), Y if isinstance(Y, LabelMatrix) else LabelMatrix(Y))
        model = train(data, self.config)
        scores = predict_scores(model, data)
        model.thresholds['t'] = calibrate_per_label(scores, data.labels, self.per_label_target)
        model.thresholds['t(x)'] = fit_instance_thresholder(scores, data.labels, self.instance_mode)
        self.model_ = model
        return self

    def _check_fitted(self):
        if self.model_ is None:
            raise RuntimeError("LIMO instance is not fitted yet; call fit first")

    def decision_function(self, X):
        self._check_fitted()
        return predict_scores(self.model_, X).scores

    def predict(self, X, thresholding='t(x)'):
        """Binary predictions

        Parameters
        ----------
        X : array-like
        thresholding : 't(x)' | 't'
            per-instance or per-label thresholds

        Returns
        -------
        H : ndarray of shape (n_instances, n_labels)
        """
        self._check_fitted()
        if thresholding not in self.model_.thresholds:
            raise ValueError(f"thresholding={thresholding!r} needs to be one of {list(self.model_.thresholds)}")
        scores = predict_scores(self.model_, X)
        return induce_classifier(scores, self.model_.thresholds[thresholding]).bits
