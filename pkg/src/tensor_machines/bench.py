"""Benchmark protocol: run each method against a shared train/test split,
growing its major parameter over a doubling schedule until the test error
stops improving by more than a fixed fraction of the kernel baseline's
error, and report error and time relative to that baseline.

The kernel ridge baseline is the denominator of both relative columns, so
it always runs first and must be present in the method list.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import (
    apply_map,
    craftmaps_project,
    fm2_eval_batch,
    fm2_fit,
    kk_map,
    krr_poly,
    ridge_on_features,
)
from .data import Dataset, metric
from .model import evaluate_batch, init_random
from .objective import ObjectiveConfig
from .solvers import (
    BatchSolverConfig,
    SolverError,
    StochasticSolverConfig,
    fit_batch,
    fit_stochastic,
)

METHODS = ("tm-batch", "tm-stochastic", "kk", "craftmaps", "krr", "fm2")

# starting value of each method's major parameter; it doubles from here
FLOORS = {
    "tm-batch": 25,  # batch iterations
    "tm-stochastic": 5,  # epochs
    "kk": 64,  # random features
    "craftmaps": 64,  # features after down-projection
    "fm2": 2,  # factor dimension
}

# stop growing once the error improves by less than this fraction of the
# kernel baseline's error
SATURATION = 0.02

CSV_HEADER = "method,err,seconds,relerr,reltime,major_param,status"


@dataclass
class BenchSettings:
    degree: int = 2
    rank: int = 4
    lam: float = 1e-5
    alpha: float = 0.1
    seed: int = 0
    trials: int = 3
    krr_cap: int = 40000
    max_sweeps: int = 8
    minibatches: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if not self.lam > 0:
            raise ValueError(
                f"the shared ridge parameter must be positive, got {self.lam}"
            )

    def trial_seeds(self) -> list[int]:
        return [self.seed + t for t in range(self.trials)]


@dataclass
class BenchRow:
    method: str
    err: float | None = None
    seconds: float | None = None
    relerr: float | None = None
    reltime: float | None = None
    major_param: int | None = None
    status: str = "ok"
    seeds: list[int] = field(default_factory=list)

    def csv_line(self) -> str:
        def num(v, fmt="{!r}"):
            return "" if v is None else fmt.format(v)

        return ",".join(
            [
                self.method,
                num(self.err),
                num(self.seconds, "{:.6f}"),
                num(self.relerr),
                num(self.reltime, "{:.6f}"),
                num(self.major_param, "{:d}"),
                self.status,
            ]
        )


def _status_text(exc: Exception) -> str:
    text = f"{type(exc).__name__}: {exc}"
    return text.replace(",", ";").replace("\n", " ")


def _lam_ridge(settings: BenchSettings, n: int) -> float:
    # the model objective averages the loss over n points while the feature
    # and kernel solvers work with unnormalized squared error, so the same
    # user-facing parameter maps to lam * n there
    return settings.lam * n


def _run_krr(train, test, settings, trial_seed):
    preds = krr_poly(
        train.X,
        train.y,
        test.X,
        settings.degree,
        _lam_ridge(settings, train.n),
        cap=settings.krr_cap,
        seed=trial_seed,
    )
    return metric(preds, test.y, test.task).value


def _run_tm(train, test, settings, trial_seed, major, solver):
    loss = "squared" if train.task == "regression" else "logistic"
    cfg_obj = ObjectiveConfig(lam=settings.lam, loss=loss)
    init = init_random(
        train.d, settings.degree, settings.rank, settings.alpha, trial_seed
    )
    if solver == "batch":
        params, _ = fit_batch(init, train, cfg_obj, BatchSolverConfig(max_iters=major))
    else:
        params, _ = fit_stochastic(
            init,
            train,
            cfg_obj,
            StochasticSolverConfig(
                epochs=major,
                minibatch_count=settings.minibatches,
                seed=trial_seed,
            ),
        )
    return metric(evaluate_batch(params, test.X), test.y, test.task).value


def _run_features(train, test, settings, trial_seed, major, method):
    if method == "kk":
        fmap = kk_map(
            trial_seed, train.d, settings.degree, major, degree_policy="stratified"
        )
    else:
        # up-project to four times the final count; the stratified map packs
        # 4 * major - 1 random features plus the constant column, which makes
        # the up count divisible by four as the down-projection requires
        up = kk_map(
            trial_seed,
            train.d,
            settings.degree,
            4 * major - 1,
            degree_policy="stratified",
        )
        fmap = craftmaps_project(up, trial_seed + 101)
    Ztr = apply_map(fmap, train.X)
    w = ridge_on_features(Ztr, train.y, _lam_ridge(settings, train.n), task=train.task)
    preds = apply_map(fmap, test.X) @ w
    return metric(preds, test.y, test.task).value


def _run_fm2(train, test, settings, trial_seed, major):
    loss = "squared" if train.task == "regression" else "logistic"
    params = fm2_fit(
        train, settings.lam, major, loss=loss, alpha=settings.alpha, seed=trial_seed
    )
    return metric(fm2_eval_batch(params, test.X), test.y, test.task).value


def _trial_mean(train, test, settings, major, run_one):
    """Average error and wall seconds of run_one over the trial seeds."""
    errs, secs = [], []
    for trial_seed in settings.trial_seeds():
        t0 = time.perf_counter()
        errs.append(run_one(train, test, settings, trial_seed, major))
        secs.append(time.perf_counter() - t0)
    return float(np.mean(errs)), float(np.mean(secs))


def _sweep(train, test, settings, run_one, floor, threshold):
    """Double the major parameter until the error improvement drops below
    threshold or the sweep budget runs out; returns the last point."""
    major = floor
    err, secs = _trial_mean(train, test, settings, major, run_one)
    for _ in range(settings.max_sweeps - 1):
        next_major = 2 * major
        next_err, next_secs = _trial_mean(train, test, settings, next_major, run_one)
        improvement = err - next_err
        major, err, secs = next_major, next_err, next_secs
        if improvement < threshold:
            break
    return err, secs, major


def run_bench(
    train: Dataset, test: Dataset, methods: list[str], settings: BenchSettings
) -> list[BenchRow]:
    """Run the requested methods and return one result row per method, in
    the requested order. Failures become rows with a status message."""
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {list(METHODS)}")
    if "krr" not in methods:
        raise ValueError("the method list must include krr, the baseline")
    if len(set(methods)) != len(methods):
        raise ValueError(f"duplicate methods in {methods}")

    seeds = settings.trial_seeds()
    rows: dict[str, BenchRow] = {}

    try:
        krr_err, krr_secs = _trial_mean(train, test, settings, None,
                                        lambda tr, te, s, ts, _: _run_krr(tr, te, s, ts))
        rows["krr"] = BenchRow(
            "krr", err=krr_err, seconds=krr_secs, relerr=0.0, reltime=1.0, seeds=seeds
        )
    except (SolverError, ValueError) as exc:
        rows["krr"] = BenchRow("krr", status=_status_text(exc), seeds=seeds)
        for m in methods:
            if m != "krr":
                rows[m] = BenchRow(m, status="skipped: baseline failed", seeds=seeds)
        return [rows[m] for m in methods]

    def relerr_vs_baseline(err: float) -> float:
        if krr_err == 0.0:
            return 0.0 if err == 0.0 else float("inf")
        return (err - krr_err) / krr_err

    threshold = SATURATION * krr_err
    runners = {
        "tm-batch": lambda tr, te, s, ts, mj: _run_tm(tr, te, s, ts, mj, "batch"),
        "tm-stochastic": lambda tr, te, s, ts, mj: _run_tm(tr, te, s, ts, mj, "stochastic"),
        "kk": lambda tr, te, s, ts, mj: _run_features(tr, te, s, ts, mj, "kk"),
        "craftmaps": lambda tr, te, s, ts, mj: _run_features(tr, te, s, ts, mj, "craftmaps"),
        "fm2": _run_fm2,
    }
    for method in methods:
        if method == "krr":
            continue
        try:
            err, secs, major = _sweep(
                train, test, settings, runners[method], FLOORS[method], threshold
            )
            rows[method] = BenchRow(
                method,
                err=err,
                seconds=secs,
                relerr=relerr_vs_baseline(err),
                reltime=secs / krr_secs,
                major_param=major,
                seeds=seeds,
            )
        except (SolverError, ValueError) as exc:
            rows[method] = BenchRow(method, status=_status_text(exc), seeds=seeds)
    return [rows[m] for m in methods]


def write_bench_csv(rows: list[BenchRow], fh, comments: list[str] = ()) -> None:
    """Comment lines (prefixed with #), the fixed header, one row per method."""
    for line in comments:
        fh.write(f"# {line}\n")
    fh.write(CSV_HEADER + "\n")
    for row in rows:
        fh.write(row.csv_line() + "\n")
