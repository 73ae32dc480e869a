"""Batch and mini-batch fitting of tensor machine parameters.

fit_batch runs limited-memory quasi-Newton (two-loop recursion) with a
strong-Wolfe line search on the flattened parameter vector. fit_stochastic
runs seeded-shuffle mini-batch descent with optional per-coordinate adaptive
scaling by accumulated squared gradients. Both are single-threaded and bit
reproducible given identical inputs and seeds.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import TmParams, flatten, unflatten
from .objective import ObjectiveConfig, make_flat_objective


class SolverError(RuntimeError):
    """Solver could not produce a usable iterate (divergence, bad objective)."""


@dataclass
class BatchSolverConfig:
    max_iters: int = 200
    memory_pairs: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    grad_tol: float = 1e-6
    objective_rel_tol: float = 1e-9
    max_bisections: int = 50

    def __post_init__(self):
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        if self.memory_pairs < 1:
            raise ValueError("memory_pairs must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class StochasticSolverConfig:
    epochs: int
    minibatch_count: int | None = None  # None means ceil(sqrt(n)), clipped to [1, n]
    base_step: float = 0.01
    decay: float = 0.0  # step at epoch t is base_step / (1 + decay * t)
    adaptive: bool = True
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.minibatch_count is not None and self.minibatch_count < 1:
            raise ValueError("minibatch_count must be >= 1")
        if not self.base_step > 0:
            raise ValueError("base_step must be positive")


@dataclass
class FitReport:
    """Solver trace: entry 0 is the initial point, one entry per accepted
    step (batch) or per epoch (stochastic) after that."""

    objective: list[float]
    grad_norm: list[float]  # infinity norms
    seconds: list[float]  # cumulative wall clock at each trace entry
    iterations: int
    params: TmParams
    seed: int | None
    config: dict
    line_search_failed: bool = False
    restarts: int = 0
    # per accepted batch step: step length and directional derivative g.d at
    # the pre-step point, enough to audit the sufficient-decrease condition
    step_alphas: list[float] = field(default_factory=list)
    step_gtd: list[float] = field(default_factory=list)

    @property
    def total_seconds(self) -> float:
        return self.seconds[-1] if self.seconds else 0.0

    def to_csv(self, fh, include_seconds: bool = True) -> None:
        """Write the trace as CSV rows. With include_seconds=False the
        nondeterministic timing column is left out, so two runs with the
        same seed produce byte-identical output."""
        cols = "iter,objective,grad_norm" + (",seconds" if include_seconds else "")
        fh.write(cols + "\n")
        for i, (o, g) in enumerate(zip(self.objective, self.grad_norm)):
            row = f"{i},{o!r},{g!r}"
            if include_seconds:
                row += f",{self.seconds[i]:.6f}"
            fh.write(row + "\n")

    def log_lines(self) -> list[str]:
        lines = [
            f"iterations={self.iterations} objective={self.objective[-1]!r} "
            f"grad_norm={self.grad_norm[-1]!r} seconds={self.total_seconds:.3f}"
        ]
        if self.line_search_failed:
            lines.append("line search failed; returned best iterate")
        if self.restarts:
            lines.append(f"step halvings after divergence: {self.restarts}")
        return lines


def _two_loop_direction(g, s_list, y_list, rho_list):
    """L-BFGS two-loop recursion; returns the descent direction -H g."""
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _wolfe_line_search(fun, w, f0, g0, d, c1, c2, max_bisections):
    """Bracket-and-zoom search for a step satisfying strong Wolfe conditions.

    Returns (alpha, w_a, f_a, g_a, failed). On failure (zoom budget spent or
    no bracket found) the best finite point seen is returned with failed=True.
    """
    gtd0 = float(g0 @ d)
    best = (0.0, w, f0, g0)

    def probe(a):
        wa = w + a * d
        fa, ga = fun(wa)
        return wa, fa, ga, float(ga @ d)

    def better(a, wa, fa, ga):
        nonlocal best
        if np.isfinite(fa) and fa < best[2]:
            best = (a, wa, fa, ga)

    lo = hi = None
    a_prev, f_prev = 0.0, f0
    a = 1.0
    for i in range(30):
        wa, fa, ga, gtd_a = probe(a)
        better(a, wa, fa, ga)
        if (not np.isfinite(fa)) or fa > f0 + c1 * a * gtd0 or (i > 0 and fa >= f_prev):
            lo, hi = (a_prev, f_prev), (a, fa)
            break
        if abs(gtd_a) <= -c2 * gtd0:
            return a, wa, fa, ga, False
        if gtd_a >= 0:
            lo, hi = (a, fa), (a_prev, f_prev)
            break
        a_prev, f_prev = a, fa
        a *= 2.0
    if lo is None:
        a_b, w_b, f_b, g_b = best
        return a_b, w_b, f_b, g_b, True

    (a_lo, f_lo), (a_hi, f_hi) = lo, hi
    for _ in range(max_bisections):
        a = 0.5 * (a_lo + a_hi)
        wa, fa, ga, gtd_a = probe(a)
        better(a, wa, fa, ga)
        if (not np.isfinite(fa)) or fa > f0 + c1 * a * gtd0 or fa >= f_lo:
            a_hi, f_hi = a, fa
        else:
            if abs(gtd_a) <= -c2 * gtd0:
                return a, wa, fa, ga, False
            if gtd_a * (a_hi - a_lo) >= 0:
                a_hi, f_hi = a_lo, f_lo
            a_lo, f_lo = a, fa
    a_b, w_b, f_b, g_b = best
    return a_b, w_b, f_b, g_b, True


@dataclass
class MinimizeResult:
    w: np.ndarray
    objective: list[float]
    grad_norm: list[float]
    seconds: list[float]
    iterations: int
    line_search_failed: bool
    step_alphas: list[float]
    step_gtd: list[float]


def minimize_vector(fun, w0: np.ndarray, cfg: BatchSolverConfig) -> MinimizeResult:
    """Limited-memory quasi-Newton core over any fun(w) -> (value, grad)."""
    t0 = time.perf_counter()
    w = np.asarray(w0, dtype=np.float64).copy()
    f, g = fun(w)
    if not np.isfinite(f):
        raise SolverError(f"objective non-finite at the initial point: {f}")
    res = MinimizeResult(
        w=w,
        objective=[f],
        grad_norm=[float(np.abs(g).max())],
        seconds=[time.perf_counter() - t0],
        iterations=0,
        line_search_failed=False,
        step_alphas=[],
        step_gtd=[],
    )

    def record(a, gtd, f_new, g_new):
        res.iterations += 1
        res.objective.append(f_new)
        res.grad_norm.append(float(np.abs(g_new).max()))
        res.seconds.append(time.perf_counter() - t0)
        res.step_alphas.append(a)
        res.step_gtd.append(gtd)

    s_list, y_list, rho_list = [], [], []
    for _ in range(cfg.max_iters):
        if res.grad_norm[-1] <= cfg.grad_tol:
            break
        d = _two_loop_direction(g, s_list, y_list, rho_list)
        gtd = float(g @ d)
        if gtd >= 0.0:  # curvature memory gave a non-descent direction
            d = -g
            gtd = float(g @ d)
            if gtd >= 0.0:
                break
        a, w_new, f_new, g_new, failed = _wolfe_line_search(
            fun, w, f, g, d, cfg.c1, cfg.c2, cfg.max_bisections
        )
        if failed:
            res.line_search_failed = True
            if f_new < f:
                w, f, g = w_new, f_new, g_new
                record(a, gtd, f, g)
            break
        s, y = w_new - w, g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > cfg.memory_pairs:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        f_prev = f
        w, f, g = w_new, f_new, g_new
        record(a, gtd, f, g)
        if abs(f_prev - f) <= cfg.objective_rel_tol * max(1.0, abs(f_prev)):
            break

    res.w = w
    return res


def fit_batch(
    init: TmParams,
    data,
    cfg_obj: ObjectiveConfig,
    cfg: BatchSolverConfig | None = None,
    seed: int | None = None,
) -> tuple[TmParams, FitReport]:
    """Minimize the regularized risk from init; returns final params and trace."""
    cfg = cfg or BatchSolverConfig()
    shape = (init.d, init.q, init.r)
    fun = make_flat_objective(data, cfg_obj, shape)
    res = minimize_vector(fun, flatten(init), cfg)
    params = unflatten(res.w, shape)
    report = FitReport(
        objective=res.objective,
        grad_norm=res.grad_norm,
        seconds=res.seconds,
        iterations=res.iterations,
        params=params,
        seed=seed,
        config=asdict(cfg),
        line_search_failed=res.line_search_failed,
        step_alphas=res.step_alphas,
        step_gtd=res.step_gtd,
    )
    return params, report


def fit_stochastic(
    init: TmParams,
    data,
    cfg_obj: ObjectiveConfig,
    cfg: StochasticSolverConfig,
) -> tuple[TmParams, FitReport]:
    """Mini-batch descent; reports the full objective once per epoch and
    returns the best iterate seen under it."""
    n = data.X.shape[0]
    if n < 1:
        raise ValueError("empty data set")
    mb = cfg.minibatch_count if cfg.minibatch_count is not None else math.isqrt(n - 1) + 1
    mb = min(max(mb, 1), n)
    shape = (init.d, init.q, init.r)
    fun = make_flat_objective(data, cfg_obj, shape)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()

    w = flatten(init)
    f, g = fun(w)
    if not np.isfinite(f):
        raise SolverError(f"objective non-finite at the initial point: {f}")
    f_init = f
    best_w, best_f = w.copy(), f
    report = FitReport(
        objective=[f],
        grad_norm=[float(np.abs(g).max())],
        seconds=[time.perf_counter() - t0],
        iterations=0,
        params=init,
        seed=cfg.seed,
        config=asdict(cfg),
    )

    accum = np.zeros_like(w)
    base_step = cfg.base_step
    for epoch in range(cfg.epochs):
        step = base_step / (1.0 + cfg.decay * epoch)
        perm = rng.permutation(n)
        for block in np.array_split(perm, mb):
            # sorted indices give one canonical accumulation order per subset
            _, gb = fun(w, index_set=np.sort(block))
            if cfg.adaptive:
                accum += gb * gb
                w = w - step * gb / (np.sqrt(accum) + cfg.eps)
            else:
                w = w - step * gb
        f, g = fun(w)
        report.iterations += 1
        report.objective.append(f)
        report.grad_norm.append(float(np.abs(g).max()))
        report.seconds.append(time.perf_counter() - t0)
        if (not np.isfinite(f)) or f > 10.0 * f_init:
            report.restarts += 1
            if report.restarts > 3:
                raise SolverError(
                    f"diverged: epoch objective {f!r} vs initial {f_init!r} "
                    f"after 3 step halvings (base_step now {base_step})"
                )
            base_step *= 0.5
            w = best_w.copy()
            accum = np.zeros_like(w)
        elif f < best_f:
            best_f, best_w = f, w.copy()

    report.params = unflatten(best_w, shape)
    return report.params, report
