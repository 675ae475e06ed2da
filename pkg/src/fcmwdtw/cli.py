"""Command-line interface.

Exit codes: 0 success, 1 internal error, 2 user or input error.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bench import run_bench
from .core import HyperParams, make_windows, read_series_csv, validate_params, write_series_csv
from .detector import read_scores_csv, score_series, write_scores_csv
from .errors import FcmWdtwError, InsufficientDataError
from .fcm import load_model, save_model
from .metrics import evaluate
from .pipeline import DEFAULT_WINDOW, fit_series, run_once
from .synth import ANOMALY_KINDS, make_synthetic

THREADS_ENV = "FCMWDTW_NUM_THREADS"

DEFAULT_C_GRID = (10, 20, 30, 40, 50)
DEFAULT_M_GRID = tuple(round(1.1 + 0.3 * k, 10) for k in range(4))
DEFAULT_Q_GRID = tuple(q for q in range(-10, 11, 2) if not 0 <= q <= 1)


class UsageError(FcmWdtwError):
    pass


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2))


def _params(args) -> HyperParams:
    return validate_params(HyperParams(
        c=args.c, m=args.m, q=args.q, epsilon=args.epsilon,
        max_iters=args.max_iters, center_length=args.center_length,
    ))


def cmd_fit(args) -> int:
    series = read_series_csv(args.input)
    params = _params(args)
    n_windows = (series.n - args.window) // args.stride + 1 if series.n >= args.window else 0
    if n_windows < params.c:
        raise InsufficientDataError(f"{n_windows} windows are fewer than c={params.c} clusters")
    tic = time.perf_counter()
    model = fit_series(series, params, args.window, args.stride, not args.no_normalize,
                       args.init, args.seed, args.band)
    elapsed = time.perf_counter() - tic
    save_model(model, args.model)
    _emit({
        "model": str(args.model),
        "iterations": model.iterations_run,
        "final_loss": model.final_loss,
        "loss_history": list(model.loss_history),
        "lambdas": model.weights.lambdas.tolist(),
        "seconds": round(elapsed, 6),
        "seconds_per_iteration": round(float(np.mean(model.iteration_seconds)), 6),
    })
    return 0


def cmd_score(args) -> int:
    model = load_model(args.model)
    series = read_series_csv(args.input)
    if series.w != model.w:
        raise UsageError(f"dimension mismatch: model expects w={model.w}, input has w={series.w}")
    result = score_series(model, series, model.window_length, args.stride, args.aggregation)
    write_scores_csv(result, args.output or sys.stdout)
    return 0


def cmd_evaluate(args) -> int:
    scores, coverage, labels = read_scores_csv(args.scores)
    if labels is None:
        raise UsageError(f"{args.scores}: no label column to evaluate against")
    keep = coverage > 0
    _emit(asdict(evaluate(scores[keep], labels[keep])))
    return 0


def _grid_cell(job):
    series, params, args = job
    _, _, ev = run_once(series, params, args["window"], args["stride"], args["normalize"],
                        args["aggregation"], args["init"], args["seed"], args["band"])
    return {"c": params.c, "m": params.m, "q": params.q, "roc_auc": ev.roc_auc, "pr_auc": ev.pr_auc}


def grid_cells(c_grid, m_grid, q_grid, epsilon, max_iters, center_length=None):
    """Hyperparameter combinations; q values in [0, 1] are dropped."""
    cells = []
    for c in c_grid:
        for m in m_grid:
            for q in q_grid:
                if 0 <= q <= 1:
                    continue
                cells.append(validate_params(HyperParams(c=int(c), m=float(m), q=float(q), epsilon=epsilon,
                                                         max_iters=max_iters, center_length=center_length)))
    return cells


def cmd_grid(args) -> int:
    series = read_series_csv(args.input)
    if series.labels is None:
        raise UsageError(f"{args.input}: grid search needs a 'label' column")
    n_windows = len(make_windows(series, args.window, args.stride))
    cells = [p for p in grid_cells(args.c_grid, args.m_grid, args.q_grid, args.epsilon, args.max_iters,
                                   args.center_length) if p.c <= n_windows]
    if not cells:
        raise InsufficientDataError(f"every c in the grid exceeds the {n_windows} available windows")
    shared = {"window": args.window, "stride": args.stride, "normalize": not args.no_normalize,
              "aggregation": args.aggregation, "init": args.init, "seed": args.seed, "band": args.band}
    jobs = [(series, p, shared) for p in cells]
    if args.jobs > 1:
        # fork after OpenMP start-up is unsafe
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=args.jobs, mp_context=ctx) as pool:
            rows = list(pool.map(_grid_cell, jobs))
    else:
        rows = [_grid_cell(j) for j in jobs]
    rows.sort(key=lambda r: -r["roc_auc"])
    for k, row in enumerate(rows):
        row["best"] = k == 0
    _emit({"cells": len(rows), "results": rows})
    return 0


def cmd_bench(args) -> int:
    rows, slope = run_bench(args.sizes, n=args.n, w=args.w, c=args.c, iters=args.iters,
                            repeats=args.repeats, seed=args.seed)
    _emit({"n": args.n, "c": args.c, "w": args.w,
           "rows": [asdict(r) for r in rows], "loglog_slope": slope})
    return 0


def cmd_synth(args) -> int:
    series = make_synthetic(n=args.n, w=args.w, n_anomalies=args.anomalies, kinds=tuple(args.kinds),
                            period=args.period, noise=args.noise, seed=args.seed)
    write_series_csv(series, args.output)
    _emit({"output": str(args.output), "n": series.n, "w": series.w,
           "anomalous_points": int(series.labels.sum())})
    return 0


def _add_fit_options(p) -> None:
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="window length (default 16)")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1e-4, help="relative loss-improvement tolerance")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--center-length", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("dpc", "random"), default="dpc")
    p.add_argument("--band", type=int, default=None, help="Sakoe-Chiba band half-width (default: none)")
    p.add_argument("--no-normalize", action="store_true", help="skip per-dimension min-max scaling")
    p.add_argument("--config", type=Path, help="YAML file of option defaults; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcmwdtw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to a series CSV")
    p.add_argument("input", type=Path)
    p.add_argument("--model", type=Path, required=True, help="where to write the model file")
    p.add_argument("-c", type=int, default=10)
    p.add_argument("-m", type=float, default=1.7)
    p.add_argument("-q", type=float, default=3.0)
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score a series CSV with a saved model")
    p.add_argument("model", type=Path)
    p.add_argument("input", type=Path)
    p.add_argument("--aggregation", choices=("mean", "max"), default="mean")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="ROC-AUC and PR-AUC of a labelled score CSV")
    p.add_argument("scores", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="fit/score/evaluate over a hyperparameter grid")
    p.add_argument("input", type=Path)
    p.add_argument("--c-grid", type=int, nargs="+", default=list(DEFAULT_C_GRID))
    p.add_argument("--m-grid", type=float, nargs="+", default=list(DEFAULT_M_GRID))
    p.add_argument("--q-grid", type=float, nargs="+", default=list(DEFAULT_Q_GRID))
    p.add_argument("--aggregation", choices=("mean", "max"), default="mean")
    p.add_argument("--jobs", type=int, default=1)
    _add_fit_options(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("bench", help="time the fit loop against window length")
    p.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64, 128])
    p.add_argument("-n", type=int, default=200, help="number of windows")
    p.add_argument("-c", type=int, default=4)
    p.add_argument("-w", type=int, default=2)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic labelled series CSV")
    p.add_argument("output", type=Path)
    p.add_argument("-n", type=int, default=2000)
    p.add_argument("-w", type=int, default=2)
    p.add_argument("--anomalies", type=int, default=5)
    p.add_argument("--kinds", nargs="+", choices=ANOMALY_KINDS, default=["flip"])
    p.add_argument("--period", type=float, default=40.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    config = getattr(args, "config", None)
    if config is None:
        return args
    try:
        doc = yaml.safe_load(Path(config).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        parser.error(f"cannot read config {config}: {exc}")
    if not isinstance(doc, dict):
        parser.error(f"config {config} must be a mapping of option names to values")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in doc.items():
        dest = str(key).replace("-", "_")
        if dest not in known:
            parser.error(f"config {config}: unknown option {key!r}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _apply_thread_override() -> None:
    threads = os.environ.get(THREADS_ENV)
    if not threads:
        return
    import numba
    try:
        numba.set_num_threads(int(threads))
    except ValueError as exc:
        raise UsageError(f"{THREADS_ENV}={threads!r}: {exc}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = _parse(parser, argv)
    try:
        _apply_thread_override()
        return args.func(args)
    except (FcmWdtwError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
