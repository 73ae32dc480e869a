"""The operations behind each endpoint and CLI subcommand.

Every handler takes a request model and returns a response model; file
errors surface as DataError and optimization failures as SolverError, so
callers can map them to HTTP statuses or exit codes uniformly.
"""

from __future__ import annotations

import time
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from ..bench import BenchRow, BenchSettings, run_bench
from ..bounds import chain_experiment, sample_point_cloud
from ..data import DataError, Dataset, kfold, metric, parse_csv, parse_sparse_text, preprocess
from ..model import evaluate_batch, init_random, load_model, save_model
from ..objective import ObjectiveConfig
from ..solvers import BatchSolverConfig, FitReport, StochasticSolverConfig, fit_batch, fit_stochastic
from . import schemas

TASK_NAMES = {"reg": "regression", "cls": "binary"}


def load_dataset(path: str, fmt: str, label_col: int, task: str) -> Dataset:
    """Parse a data file in the given format; IO problems become DataError."""
    try:
        with open(path) as fh:
            if fmt == "svm":
                return parse_sparse_text(fh, task=TASK_NAMES[task])
            return parse_csv(fh, label_column=label_col, task=TASK_NAMES[task])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _loss_for(task: str) -> str:
    return "squared" if task == "reg" else "logistic"


def _fit(train: Dataset, req, lam: float, alpha: float):
    cfg_obj = ObjectiveConfig(lam=lam, loss=_loss_for(req.task))
    init = init_random(train.d, req.degree, req.rank, alpha, req.seed)
    if req.solver == "batch":
        return fit_batch(
            init, train, cfg_obj, BatchSolverConfig(max_iters=req.iters), seed=req.seed
        )
    cfg = StochasticSolverConfig(
        epochs=req.epochs, minibatch_count=req.minibatches, seed=req.seed
    )
    return fit_stochastic(init, train, cfg_obj, cfg)


def _write_trace(report: FitReport, path: str, flag_summary: str) -> None:
    """Trace CSV with the timing confined to comment lines, so two runs with
    the same seed produce byte-identical bodies."""
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(path, "w") as fh:
        fh.write(f"# completed {stamp}\n")
        fh.write(f"# wall_seconds {report.total_seconds:.6f}\n")
        fh.write(f"# {flag_summary}\n")
        report.to_csv(fh, include_seconds=False)


def run_train(req: schemas.TrainRequest) -> schemas.TrainResponse:
    train = load_dataset(req.data, req.format, req.label_col, req.task)
    train, _ = preprocess(train)
    t0 = time.perf_counter()
    params, report = _fit(train, req, req.lam, req.alpha)
    seconds = time.perf_counter() - t0
    save_model(params, req.out, req.alpha, req.seed)
    trace = req.out + ".trace.csv"
    flag_summary = (
        f"solver={req.solver} degree={req.degree} rank={req.rank} "
        f"lambda={req.lam!r} alpha={req.alpha!r} seed={req.seed}"
    )
    _write_trace(report, trace, flag_summary)
    m = metric(evaluate_batch(params, train.X), train.y, train.task)
    return schemas.TrainResponse(
        out=req.out,
        trace=trace,
        iterations=report.iterations,
        objective=report.objective[-1],
        grad_norm=report.grad_norm[-1],
        seconds=seconds,
        train_metric=m.value,
        metric_kind=m.kind,
    )


def run_eval(req: schemas.EvalRequest) -> schemas.EvalResponse:
    try:
        params, _, _ = load_model(req.model)
    except OSError as exc:
        raise DataError(f"cannot read {req.model}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"bad model file {req.model}: {exc}") from exc
    train = load_dataset(req.data, req.format, req.label_col, req.task)
    test = load_dataset(req.test, req.format, req.label_col, req.task)
    if params.d != train.d:
        raise DataError(
            f"model expects d={params.d} but the data has d={train.d}"
        )
    train, test = preprocess(train, test)
    m = metric(evaluate_batch(params, test.X), test.y, test.task)
    return schemas.EvalResponse(value=m.value, kind=m.kind, n_test=test.n)


def run_cv(req: schemas.CvRequest) -> schemas.CvResponse:
    train = load_dataset(req.data, req.format, req.label_col, req.task)
    train, _ = preprocess(train)
    folds = kfold(train.n, k=10, seed=req.seed)
    indices = np.arange(train.n)
    table = []
    means = {}
    kind = ""
    for lam in req.lam_grid:
        for alpha in req.alpha_grid:
            values = []
            for i, fold in enumerate(folds):
                keep = np.setdiff1d(indices, fold)
                sub = replace(train, X=train.X[keep], y=train.y[keep])
                params, _ = _fit(sub, req, lam, alpha)
                m = metric(evaluate_batch(params, train.X[fold]), train.y[fold], train.task)
                kind = m.kind
                values.append(m.value)
                table.append(
                    schemas.CvFoldValue(lam=lam, alpha=alpha, fold=i, value=m.value)
                )
            means[(lam, alpha)] = float(np.mean(values))
    # smallest mean wins; ties prefer stronger regularization, then a
    # smaller initialization scale
    best_lam, best_alpha = min(means, key=lambda c: (means[c], -c[0], c[1]))
    return schemas.CvResponse(
        best_lam=best_lam,
        best_alpha=best_alpha,
        best_mean=means[(best_lam, best_alpha)],
        metric_kind=kind,
        folds=len(folds),
        table=table,
    )


def run_bench_cmd(req: schemas.BenchRequest) -> schemas.BenchResponse:
    train = load_dataset(req.data, req.format, req.label_col, req.task)
    test = load_dataset(req.test, req.format, req.label_col, req.task)
    train, test = preprocess(train, test)
    settings = BenchSettings(
        degree=req.degree,
        rank=req.rank,
        lam=req.lam,
        alpha=req.alpha,
        seed=req.seed,
        trials=req.trials,
        krr_cap=req.krr_cap,
        max_sweeps=req.max_sweeps,
        minibatches=req.minibatches,
    )
    try:
        rows = run_bench(train, test, req.methods, settings)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return schemas.BenchResponse(rows=[_row_model(r) for r in rows])


def _row_model(row: BenchRow) -> schemas.BenchRowModel:
    return schemas.BenchRowModel(
        method=row.method,
        err=row.err,
        seconds=row.seconds,
        relerr=row.relerr,
        reltime=row.reltime,
        major_param=row.major_param,
        status=row.status,
        seeds=row.seeds,
    )


def run_bounds(req: schemas.BoundsRequest) -> schemas.BoundsResponse:
    if req.data is not None:
        points = load_dataset(req.data, req.format, req.label_col, "reg").X
    else:
        points = sample_point_cloud(req.seed, req.points, req.dim)
    result = chain_experiment(
        points, q=req.degree, B=req.ball, sigma_draws=req.draws, seed=req.seed
    )
    draws = [
        schemas.BoundsDraw(
            draw=i, lower=d.lower, upper=d.upper, max_entry_lhs=d.max_entry
        )
        for i, d in enumerate(result.draws)
    ]
    return schemas.BoundsResponse(
        draws=draws,
        rhs=result.max_entry_rhs,
        lower_mean=result.lower_mean,
        upper_mean=result.upper_mean,
        max_entry_mean=result.max_entry_mean,
    )
