"""Replicated train/evaluate runs, relative rescaling and rank aggregation"""
import json
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import rankdata

from ._data import SplitSpec, load_dense, load_sparse, split, synth_quadrant
from ._gen_utils import EvaluationError, ExperimentError, derive_seed, logger
from ._measures import MEASURES, resolve_measures
from ._thresholding import INSTANCE_MODES, calibrate_per_label, fit_instance_thresholder, induce_classifier
from .opt.opt import DEFAULT_PAIRING, VARIANTS, TrainConfig, predict_scores, train


PAIRINGS = ('t(x)', 't')
STATISTICS = ('mean', 'std', 'relative', 'rank')

# per-label calibration target used for each classification measure under `t`
CALIBRATION_FOR = {
    'hamming_loss': 'hamming_loss',
    'macro_f1': 'macro_f1',
    'micro_f1': 'micro_f1',
    'instance_f1': 'micro_f1',
}


def _check_keys(d, allowed, what):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ValueError(f"unknown key(s) {unknown} in {what}; allowed: {sorted(allowed)}")


@dataclass(frozen=True)
class VariantSpec:
    """One learner of an experiment

    name : 'LIMO' | 'LIMO-label' | 'LIMO-inst'
    lambda1, lambda2 : float
        a zero weight switches the term off; has to agree with the name
    thresholds : tuple of 't(x)' | 't'
        classification pairings to report
    """
    name: str
    lambda1: float
    lambda2: float
    thresholds: tuple = None

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise ValueError(f"variant {self.name!r} needs to be one of {list(VARIANTS)}")
        use_label, use_instance = VARIANTS[self.name]
        if (self.lambda1 > 0) != use_label or (self.lambda2 > 0) != use_instance:
            raise ValueError(f"{self.name} needs lambda1 {'> 0' if use_label else '= 0'} and "
                             f"lambda2 {'> 0' if use_instance else '= 0'}, "
                             f"got lambda1={self.lambda1}, lambda2={self.lambda2}")
        thresholds = DEFAULT_PAIRING[self.name] if self.thresholds is None else tuple(self.thresholds)
        bad = [t for t in thresholds if t not in PAIRINGS]
        if bad or not thresholds:
            raise ValueError(f"{self.name}: thresholds {list(thresholds)} need to be drawn from {PAIRINGS}")
        object.__setattr__(self, 'thresholds', thresholds)

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, ('name', 'lambda', 'lambda1', 'lambda2', 'thresholds'), 'variant')
        if 'name' not in d:
            raise ValueError(f"variant {d} lacks a 'name'")
        d = dict(d)
        name = d.pop('name')
        if 'lambda' in d:
            lam = float(d.pop('lambda'))
            use_label, use_instance = VARIANTS.get(name, (True, True))
            d.setdefault('lambda1', lam if use_label else 0.0)
            d.setdefault('lambda2', lam if use_instance else 0.0)
        if 'lambda1' not in d or 'lambda2' not in d:
            raise ValueError(f"variant {name!r} needs 'lambda' or both 'lambda1' and 'lambda2'")
        return cls(name, float(d['lambda1']), float(d['lambda2']), d.get('thresholds'))

    def method_names(self):
        "names under which classification measures are reported"
        return [f'{self.name}-{t}' for t in self.thresholds]


@dataclass
class ExperimentPlan:
    """Everything that determines an experiment

    Attributes
    ----------
    dataset : dict
        {'kind': 'synth', 'n': int, 'seed': int} |
        {'kind': 'dense', 'path': str} |
        {'kind': 'sparse', 'path': str, 'labels': int, 'features': int (optional)}
    variants : list of VariantSpec
    replicates : int
    split : SplitSpec
        `seed` is the base seed; replicate r uses seed + r.
    eta, iters : float, int
        shared SGD settings
    seed : int
        base training seed
    measures : list of str
    instance_mode : 'threshold' | 'cut'
    fit_intercept : bool
        train every variant with a per-label bias
    n_jobs : int
        joblib workers; the report does not depend on it.
    """
    dataset: dict
    variants: list
    replicates: int = 10
    split: SplitSpec = field(default_factory=lambda: SplitSpec(0.5, 0))
    eta: float = 0.01
    iters: int = 100000
    seed: int = 0
    measures: list = None
    instance_mode: str = 'threshold'
    fit_intercept: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        kind = self.dataset.get('kind')
        if kind not in ('synth', 'dense', 'sparse'):
            raise ValueError(f"dataset kind {kind!r} needs to be 'synth', 'dense' or 'sparse'")
        if kind in ('dense', 'sparse') and 'path' not in self.dataset:
            raise ValueError(f"{kind} dataset needs a 'path'")
        if kind == 'sparse' and 'labels' not in self.dataset:
            raise ValueError("sparse dataset needs 'labels'")
        self.variants = [v if isinstance(v, VariantSpec) else VariantSpec.from_dict(v) for v in self.variants]
        if not self.variants:
            raise ValueError("plan needs at least one variant")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variants in {names}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError(f"replicates={self.replicates} needs to be a positive integer")
        if not isinstance(self.split, SplitSpec):
            _check_keys(self.split, ('train_fraction', 'seed'), 'split')
            self.split = SplitSpec(**self.split)
        self.measures = resolve_measures(self.measures)
        if self.instance_mode not in INSTANCE_MODES:
            raise ValueError(f"instance_mode={self.instance_mode!r} needs to be one of {INSTANCE_MODES}")
        # validates eta, iters, seed and fit_intercept
        TrainConfig(1.0, 1.0, self.eta, self.iters, self.seed, self.fit_intercept)

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, [f.name for f in fields(cls)], 'experiment plan')
        missing = [name for name in ('dataset', 'variants') if name not in d]
        if missing:
            raise ValueError(f"experiment plan lacks required key(s) {missing}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding='utf-8') as fp:
            return cls.from_dict(json.load(fp))

    def to_dict(self):
        d = asdict(self)
        for v in d['variants']:
            v['thresholds'] = list(v['thresholds'])
        return d

    def load_dataset(self):
        ds = self.dataset
        if ds['kind'] == 'synth':
            return synth_quadrant(int(ds.get('n', 2000)), int(ds.get('seed', 0)))
        if ds['kind'] == 'dense':
            return load_dense(ds['path'])
        return load_sparse(ds['path'], int(ds['labels']), ds.get('features'))


@dataclass
class ExperimentReport:
    """Raw cells, aggregates, relative values and ranks of one experiment

    Attributes
    ----------
    plan : dict
    cells : list of dict
        one {variant, replicate, method, measure, value} per evaluated cell
    errors : list of dict
        {variant, replicate, measure, error} for every failed stage
    summary : dict
        method -> measure -> {'mean', 'std', 'n'}; std with ddof=0
    relative : dict
        measure -> method -> value in [0, 1] (best 1, worst 0)
    ranks : dict
        measure -> method -> rank (1 best, ties share the mean rank)
    wall_clock : float
        seconds
    relative_ties : list of str
        measures on which every method had the same mean; their relative
        values are all 1 and carry no ordering.
    """
    plan: dict
    cells: list
    errors: list
    summary: dict
    relative: dict
    ranks: dict
    wall_clock: float = 0.0
    relative_ties: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_frame(self):
        "raw cells as a DataFrame"
        return pd.DataFrame(self.cells, columns=['variant', 'replicate', 'method', 'measure', 'value'])

    def methods(self, measure):
        return sorted(m for m in self.summary if measure in self.summary[m])


def rescale_relative(values, higher_is_better=True):
    """Affine map sending the best value to 1 and the worst to 0

    Parameters
    ----------
    values : sequence of float
    higher_is_better : bool

    Returns
    -------
    relative : ndarray
        all ones (with a RuntimeWarning) when every value is equal.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError(f"rescaling needs at least 2 values, got {values.size}")
    lo, hi = values.min(), values.max()
    if lo == hi:
        msg = "all values are equal; every method is rescaled to 1"
        logger.warning(msg)
        warnings.warn(msg, RuntimeWarning)
        return np.ones_like(values)
    if higher_is_better:
        return (values - lo) / (hi - lo)
    return (hi - values) / (hi - lo)


def average_ranks(values, higher_is_better=True):
    """Mean per-dataset rank of every method

    Parameters
    ----------
    values : array-like of shape (n_datasets, n_methods) | pandas.DataFrame
        a DataFrame keeps its column labels in the result.
    higher_is_better : bool

    Returns
    -------
    ranks : ndarray of shape (n_methods,) | pandas.Series
        rank 1 is best; ties share the mean of their positions.
    """
    columns = values.columns if isinstance(values, pd.DataFrame) else None
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"need at least one dataset row, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ValueError("every method needs a value on every dataset")
    ranks = rankdata(-arr if higher_is_better else arr, method='average', axis=1)
    mean = ranks.mean(axis=0)
    return pd.Series(mean, index=columns, name='average_rank') if columns is not None else mean


def average_ranks_table(frame):
    """Average ranks from long-format results

    Parameters
    ----------
    frame : pandas.DataFrame
        columns dataset, method, measure, value; measure names as in MEASURES

    Returns
    -------
    table : pandas.DataFrame
        columns measure, method, average_rank
    """
    missing = {'dataset', 'method', 'measure', 'value'} - set(frame.columns)
    if missing:
        raise ValueError(f"results table lacks column(s) {sorted(missing)}")
    out = []
    for measure, group in frame.groupby('measure', sort=False):
        if measure not in MEASURES:
            raise ValueError(f"unknown measure {measure!r}; choose from {list(MEASURES)}")
        wide = group.pivot(index='dataset', columns='method', values='value')
        ranks = average_ranks(wide, MEASURES[measure].higher_is_better)
        out.extend({'measure': measure, 'method': method, 'average_rank': float(rank)}
                   for method, rank in ranks.items())
    return pd.DataFrame(out, columns=['measure', 'method', 'average_rank'])


def _evaluate(name, *args):
    try:
        return MEASURES[name].func(*args), None
    except EvaluationError as err:
        return None, str(err)


def _run_cell(data, plan, replicate, v_index):
    """Train one variant on one replicate's split and evaluate it on the test part

    Returns
    -------
    rows : list of dict
    errors : list of dict
    """
    variant = plan.variants[v_index]
    rows, errors = [], []

    def record(method, measure, value, error):
        if error is None:
            rows.append({'variant': variant.name, 'replicate': replicate, 'method': method,
                         'measure': measure, 'value': float(value)})
        else:
            errors.append({'variant': variant.name, 'replicate': replicate, 'measure': measure,
                           'error': error})

    try:
        spec = SplitSpec(plan.split.train_fraction, plan.split.seed + replicate)
        train_part, test_part = split(data, spec)
        cfg = TrainConfig(variant.lambda1, variant.lambda2, plan.eta, plan.iters,
                          derive_seed(plan.seed, 'cell', replicate, v_index), plan.fit_intercept)
        model = train(train_part, cfg)
        f_train = predict_scores(model, train_part)
        f_test = predict_scores(model, test_part)
        y_train, y_test = train_part.labels, test_part.labels

        for name in plan.measures:
            if MEASURES[name].kind == 'ranking':
                record(variant.name, name, *_evaluate(name, f_test, y_test))

        classification = [name for name in plan.measures if MEASURES[name].kind == 'classification']
        if classification and 't(x)' in variant.thresholds:
            thresholder = fit_instance_thresholder(f_train, y_train, plan.instance_mode)
            h = induce_classifier(f_test, thresholder)
            for name in classification:
                record(f'{variant.name}-t(x)', name, *_evaluate(name, h, y_test))
        if classification and 't' in variant.thresholds:
            calibrated = {}
            for name in classification:
                target = CALIBRATION_FOR[name]
                if target not in calibrated:
                    calibrated[target] = calibrate_per_label(f_train, y_train, target)
                h = induce_classifier(f_test, calibrated[target])
                record(f'{variant.name}-t', name, *_evaluate(name, h, y_test))
    except Exception as err:
        logger.warning(f"cell ({variant.name}, replicate {replicate}) failed: {type(err).__name__}: {err}")
        errors.append({'variant': variant.name, 'replicate': replicate, 'measure': None,
                       'error': f'{type(err).__name__}: {err}'})
        rows = []
    return rows, errors


def _aggregate(cells):
    frame = pd.DataFrame(cells)
    grouped = frame.groupby(['method', 'measure'], sort=True)['value']
    stats = grouped.agg(mean='mean', std=lambda s: float(np.std(s.to_numpy(), ddof=0)), n='count')
    summary = {}
    for (method, measure), row in stats.iterrows():
        summary.setdefault(method, {})[measure] = {
            'mean': float(row['mean']), 'std': float(row['std']), 'n': int(row['n'])}

    relative, ranks, ties = {}, {}, []
    for measure in MEASURES:
        methods = sorted(m for m in summary if measure in summary[m])
        if not methods:
            continue
        means = [summary[m][measure]['mean'] for m in methods]
        higher = MEASURES[measure].higher_is_better
        ranks[measure] = dict(zip(methods, (float(r) for r in average_ranks([means], higher))))
        if len(methods) >= 2:
            if min(means) == max(means):
                ties.append(measure)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', RuntimeWarning)
                relative[measure] = dict(zip(methods, (float(v) for v in rescale_relative(means, higher))))
    if ties:
        logger.warning(f"every method tied on {ties}; their relative values are all 1")
    return summary, relative, ranks, ties


def run_experiment(plan, data=None):
    """Replicated experiment

    For every replicate r the dataset is split with seed `plan.split.seed + r`;
    every variant is trained with a seed derived from (plan.seed, r, variant),
    its thresholders are fit on the training scores and all requested
    measures are evaluated on the test part.

    Parameters
    ----------
    plan : ExperimentPlan
    data : Dataset, optional
        overrides `plan.dataset`

    Returns
    -------
    report : ExperimentReport
    """
    t0 = time.perf_counter()
    if data is None:
        data = plan.load_dataset()
    jobs = [(r, v) for r in range(plan.replicates) for v in range(len(plan.variants))]
    logger.info(f"experiment: {len(jobs)} cells ({plan.replicates} replicates x {len(plan.variants)} variants) "
                f"on m={data.m}, d={data.d}, l={data.l}")
    if plan.n_jobs == 1:
        results = [_run_cell(data, plan, r, v) for r, v in jobs]
    else:
        results = Parallel(n_jobs=plan.n_jobs, verbose=10)(delayed(_run_cell)(data, plan, r, v) for r, v in jobs)

    cells = [row for rows, _ in results for row in rows]
    errors = [err for _, errs in results for err in errs]
    if not cells:
        raise ExperimentError(f"no experiment cell completed; {len(errors)} error(s), first: "
                              f"{errors[0]['error'] if errors else 'none'}")
    if errors:
        logger.warning(f"experiment finished with {len(errors)} failed stage(s)")
    summary, relative, ranks, ties = _aggregate(cells)
    return ExperimentReport(plan.to_dict(), cells, errors, summary, relative, ranks,
                            time.perf_counter() - t0, ties)


def report_table(report):
    """One row per (method, measure, statistic)

    Returns
    -------
    table : pandas.DataFrame
        columns method, measure, statistic, value; `relative` is empty
        where fewer than two methods were evaluated.
    """
    rows = []
    for method in sorted(report.summary):
        for measure in MEASURES:
            if measure not in report.summary[method]:
                continue
            stats = report.summary[method][measure]
            values = {
                'mean': stats['mean'],
                'std': stats['std'],
                'relative': report.relative.get(measure, {}).get(method),
                'rank': report.ranks.get(measure, {}).get(method),
            }
            rows.extend({'method': method, 'measure': measure, 'statistic': s, 'value': values[s]}
                        for s in STATISTICS)
    return pd.DataFrame(rows, columns=['method', 'measure', 'statistic', 'value'])


def emit_report(report, format, path):
    """Write the report as JSON (full, sorted keys) or CSV (plot-ready long table)

    Parameters
    ----------
    report : ExperimentReport
    format : 'json' | 'csv'
    path : str | Path
    """
    if format not in ('json', 'csv'):
        raise ValueError(f"format={format!r} needs to be 'json' or 'csv'")
    path = Path(path)
    try:
        if format == 'json':
            with open(path, 'w', encoding='utf-8') as fp:
                json.dump(report.to_dict(), fp, sort_keys=True, indent=2)
                fp.write('\n')
        else:
            report_table(report).to_csv(path, index=False)
    except OSError as err:
        raise OSError(f"cannot write report to {path}: {err}") from err
    logger.info(f"report written to {path}")
