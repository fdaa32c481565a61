"""`limo` command line interface

Exit codes: 0 success, 2 argument/validation error, 3 data error,
4 numeric error, 1 any other run error.
"""
import argparse
import json
import sys
from pathlib import Path

import pandas as pd

from ._data import load_dense, load_matrix, load_sparse, save_dense, save_matrix, synth_quadrant
from ._experiment import ExperimentPlan, average_ranks_table, emit_report, run_experiment
from ._gen_utils import LoadError, NumericError, logger, set_log_level
from ._margins import margin_profile
from ._measures import MEASURES, evaluate_all
from ._thresholding import CALIBRATION_TARGETS, INSTANCE_MODES, induce_classifier
from .opt.opt import LIMO, LinearModel, predict_scores


def _load_data(args):
    if args.sparse:
        if args.labels is None:
            raise ValueError("--sparse needs --labels <l>")
        return load_sparse(args.data, args.labels, args.features)
    return load_dense(args.data)


def _format(args):
    if args.format is not None:
        return args.format
    return 'csv' if Path(args.out).suffix.lower() == '.csv' else 'json'


def _write_json(obj, path):
    with open(path, 'w', encoding='utf-8') as fp:
        json.dump(obj, fp, sort_keys=True, indent=2)
        fp.write('\n')


def cmd_eval(args):
    scores = load_matrix(args.scores)
    labels = load_matrix(args.labels, binary=True)
    preds = None if args.preds is None else load_matrix(args.preds, binary=True)
    report = evaluate_all(scores, labels, preds, measures=args.measures)
    values = report.to_dict()
    if _format(args) == 'json':
        _write_json(values, args.out)
    else:
        pd.DataFrame({'measure': list(values), 'value': list(values.values())}).to_csv(args.out, index=False)
    for name in MEASURES:
        if values.get(name) is not None:
            logger.info(f"{name}: {values[name]:.6g}")


def cmd_train(args):
    data = _load_data(args)
    est = LIMO(args.lambda1, args.lambda2, args.eta, args.iters, args.seed,
               per_label_target=args.per_label_target, instance_mode=args.instance_mode,
               fit_intercept=not args.no_intercept)
    est.fit(data.features, data.labels)
    est.model_.save(args.model_out)
    logger.info(f"model written to {args.model_out}")


def cmd_predict(args):
    model = LinearModel.load(args.model)
    data = _load_data(args)
    scores = predict_scores(model, data)
    save_matrix(scores.scores, args.out)
    if args.preds_out is not None:
        if args.thresholding not in model.thresholds:
            raise ValueError(f"model has no {args.thresholding!r} thresholds; has {list(model.thresholds)}")
        save_matrix(induce_classifier(scores, model.thresholds[args.thresholding]).bits, args.preds_out)


def cmd_synth(args):
    save_dense(synth_quadrant(args.n, args.seed), args.out)


def cmd_experiment(args):
    plan = ExperimentPlan.from_json(args.plan)
    if args.n_jobs is not None:
        plan.n_jobs = args.n_jobs
    report = run_experiment(plan)
    emit_report(report, _format(args), args.out)


def cmd_margins(args):
    scores = load_matrix(args.scores)
    labels = load_matrix(args.labels, binary=True)
    _write_json(margin_profile(scores, labels).to_dict(), args.out)


def cmd_rank(args):
    frame = pd.read_csv(args.values)
    average_ranks_table(frame).to_csv(args.out, index=False)


def build_parser():
    parser = argparse.ArgumentParser(prog='limo', description="Multi-label learning with label-wise and "
                                                               "instance-wise margins")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='count', default=0, help="INFO (-v) or DEBUG (-vv) logging")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="only log errors")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('eval', help="evaluate a score matrix (and optionally predictions)")
    p.add_argument('--scores', required=True)
    p.add_argument('--labels', required=True, help="label matrix or dense dataset file")
    p.add_argument('--preds')
    p.add_argument('--measures', default='all', help="'all' or a comma separated list")
    p.add_argument('--out', required=True)
    p.add_argument('--format', choices=('json', 'csv'))
    p.set_defaults(func=cmd_eval)

    def data_args(p):
        p.add_argument('--data', required=True)
        p.add_argument('--sparse', action='store_true', help="sparse 'lab,lab idx:val' format")
        p.add_argument('--labels', type=int, help="number of labels (sparse format)")
        p.add_argument('--features', type=int, help="feature dimension (sparse format)")

    p = sub.add_parser('train', help="train a model and calibrate its thresholds")
    data_args(p)
    p.add_argument('--lambda1', type=float, required=True)
    p.add_argument('--lambda2', type=float, required=True)
    p.add_argument('--eta', type=float, default=0.01)
    p.add_argument('--iters', type=int, default=100000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--per-label-target', choices=CALIBRATION_TARGETS, default='macro_f1')
    p.add_argument('--instance-mode', choices=INSTANCE_MODES, default='threshold')
    p.add_argument('--no-intercept', action='store_true', help="score with X W only, without a per-label bias")
    p.add_argument('--model-out', required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('predict', help="score a dataset with a saved model")
    p.add_argument('--model', required=True)
    data_args(p)
    p.add_argument('--out', required=True, help="score matrix output")
    p.add_argument('--preds-out', help="also write binary predictions")
    p.add_argument('--thresholding', choices=('t(x)', 't'), default='t(x)')
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser('synth', help="write the quadrant dataset")
    p.add_argument('--n', type=int, default=2000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('experiment', help="run a replicated experiment from a JSON plan")
    p.add_argument('--plan', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--format', choices=('json', 'csv'))
    p.add_argument('--n-jobs', type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser('margins', help="margin and effectiveness diagnostics")
    p.add_argument('--scores', required=True)
    p.add_argument('--labels', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_margins)

    p = sub.add_parser('rank', help="average ranks from per-dataset results")
    p.add_argument('--values', required=True, help="CSV with columns dataset, method, measure, value")
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    set_log_level('ERROR' if args.quiet else ('WARNING', 'INFO', 'DEBUG')[min(args.verbose, 2)])
    try:
        args.func(args)
    except LoadError as err:
        logger.error(str(err))
        return 3
    except NumericError as err:
        logger.error(str(err))
        return 4
    except ValueError as err:
        logger.error(str(err))
        return 2
    except OSError as err:
        logger.error(str(err))
        return 3
    except Exception as err:
        logger.error(f"{type(err).__name__}: {err}")
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
