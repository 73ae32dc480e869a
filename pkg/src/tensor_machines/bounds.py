"""Generalization-bound formulas and empirical Rademacher experiments.

The closed-form bounds scale as (norm cap terms)^q * poly(q) * dimension
term / sqrt(n). The empirical side estimates the Rademacher complexity of
the degree-q rank-one class from both directions on shared sign draws: an
upper route through the spectral norm of the signed data tensor, and a
lower route through projected gradient ascent over feasible factor vectors.
All estimators run within the dense tensor oracle's size cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import TmParams, grad_batch
from .tensors import max_abs_entry, rademacher_sum, spectral_norm


@dataclass(frozen=True)
class BoundInputs:
    d: int
    q: int
    r: int
    B: float
    B_x: float
    n: int
    c: float = 1.0

    def __post_init__(self):
        for name in ("d", "q", "r", "B", "B_x", "n", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def _dimension_term(d: int, q: int) -> float:
    # ln(1) = 0, so d = 1 keeps only the sqrt(d) part
    return math.sqrt(q * d * math.log(d)) + math.sqrt(d)


def bound_thm1(inp: BoundInputs) -> float:
    """Rank-r class bound: c * r * (1 + 8 B B_x)^q * q^2 * dim term / sqrt(n)."""
    rest = (
        (1.0 + 8.0 * inp.B * inp.B_x) ** inp.q
        * inp.q**2
        * _dimension_term(inp.d, inp.q)
        / math.sqrt(inp.n)
    )
    return (inp.c * inp.r) * rest


def bound_thm2(inp: BoundInputs) -> float:
    """Rank-one homogeneous class bound: c * (8 B B_x)^q * q * dim term / sqrt(n).
    The rank field of inp is ignored."""
    return (
        inp.c
        * (8.0 * inp.B * inp.B_x) ** inp.q
        * inp.q
        * _dimension_term(inp.d, inp.q)
        / math.sqrt(inp.n)
    )


# ---------------------------------------------------------------------------
# empirical estimators
# ---------------------------------------------------------------------------

def _draw_signs(rng, draws: int, n: int) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=(draws, n))


def sample_point_cloud(seed: int, n: int, d: int) -> np.ndarray:
    """Rows with seeded unit directions scaled by radii between 0.5 and 1.0,
    so the maximum row norm stays near 1 while typical rows sit strictly
    inside the ball; a convenient default input for the estimators."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    X = X / np.where(norms > 0, norms, 1.0)
    return X * rng.uniform(0.5, 1.0, size=(n, 1))


def _project_ball(W: np.ndarray, B: float) -> np.ndarray:
    """Scale each row (last axis) back onto the radius-B ball if outside."""
    norms = np.linalg.norm(W, axis=-1, keepdims=True)
    scale = np.where(norms > B, B / np.where(norms > 0, norms, 1.0), 1.0)
    return W * scale


def _upper_one_draw(X, sigma, q: int, B: float, restarts: int) -> float:
    n = X.shape[0]
    T = rademacher_sum(X, sigma, q)
    return (B**q / n) * spectral_norm(T, restarts=restarts)


def _sup_rank_one(X, sigma, q, B, rng, restarts, iters, step):
    """Feasible lower value of sup over ||w_j|| <= B of (1/n) sum_i
    sigma_i prod_j <w_j, x_i>, by multi-start projected gradient ascent.

    Ascent directions come from the model's gradient code with per-point
    weights sigma_i / n; restarts run in parallel as independent rank slots.
    """
    n, d = X.shape
    coef = sigma / n
    if q == 1:
        # constant ascent direction; run long enough to pin the closed form
        w = _project_ball(rng.normal(size=(1, d)), B)[0]
        for _ in range(max(iters, 400)):
            g = grad_batch(TmParams(bias=0.0, linear=w), X, coef).linear
            w = _project_ball((w + step * g)[None, :], B)[0]
        return float(coef @ (X @ w))

    W = _project_ball(rng.normal(size=(restarts, q, d)), B)
    zero_blocks = {p: np.zeros((restarts, p, d)) for p in range(2, q)}
    for _ in range(iters):
        params = TmParams(
            bias=0.0, linear=np.zeros(d), factors={**zero_blocks, q: W}
        )
        g = grad_batch(params, X, coef)
        W = _project_ball(W + step * g.factors[q], B)
    # value of each restart's rank-one term alone
    A = np.einsum("nd,rpd->nrp", X, W)
    values = coef @ A.prod(axis=2)
    return float(values.max())


def empirical_rademacher_upper(
    points,
    q: int,
    B: float,
    sigma_draws: int = 200,
    seed: int = 0,
    restarts: int = 10,
) -> float:
    """Monte-Carlo mean over sign draws of (B^q / n) * ||sum_i s_i x_i^(q)||."""
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    rng = np.random.default_rng(seed)
    signs = _draw_signs(rng, sigma_draws, X.shape[0])
    return float(
        np.mean([_upper_one_draw(X, s, q, B, restarts) for s in signs])
    )


def empirical_rademacher_lower(
    points,
    q: int,
    B: float,
    sigma_draws: int = 200,
    restarts: int = 20,
    seed: int = 0,
    iters: int = 80,
    step: float = 0.3,
) -> float:
    """Monte-Carlo mean of per-draw feasible maxima; a lower estimate of the
    empirical Rademacher complexity of the rank-one degree-q class."""
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    rng = np.random.default_rng(seed)
    signs = _draw_signs(rng, sigma_draws, X.shape[0])
    vals = [
        _sup_rank_one(X, s, q, B, rng, restarts, iters, step) for s in signs
    ]
    return float(np.mean(vals))


def max_entry_check(points, q: int, sigma_draws: int = 200, seed: int = 0):
    """Monte-Carlo mean of max |entry of the signed data tensor| against the
    sqrt(n) * (max row norm)^q ceiling; returns (lhs, rhs)."""
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    signs = _draw_signs(rng, sigma_draws, n)
    lhs = float(np.mean([max_abs_entry(rademacher_sum(X, s, q)) for s in signs]))
    bx = float(np.linalg.norm(X, axis=1).max())
    rhs = math.sqrt(n) * bx**q
    return lhs, rhs


@dataclass
class ChainDraw:
    """Per-sign-draw record of the inequality chain quantities."""

    lower: float
    upper: float
    max_entry: float


@dataclass
class ChainResult:
    draws: list[ChainDraw]
    max_entry_rhs: float  # sqrt(n) * (max row norm)^q, shared by all draws

    @property
    def lower_mean(self) -> float:
        return float(np.mean([d.lower for d in self.draws]))

    @property
    def upper_mean(self) -> float:
        return float(np.mean([d.upper for d in self.draws]))

    @property
    def max_entry_mean(self) -> float:
        return float(np.mean([d.max_entry for d in self.draws]))


def chain_experiment(
    points,
    q: int,
    B: float,
    sigma_draws: int = 200,
    seed: int = 0,
    norm_restarts: int = 10,
    pga_restarts: int = 20,
    pga_iters: int = 80,
    pga_step: float = 0.3,
) -> ChainResult:
    """Evaluate lower estimate, upper estimate, and max-entry statistic on
    SHARED sign draws so the inequalities can be checked draw by draw.

    The upper route's power iteration runs to machine-level tolerance so the
    fixed-step ascent of the lower route cannot overtake it through its own
    early stopping.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    signs = _draw_signs(rng, sigma_draws, n)
    rows = []
    for s in signs:
        T = rademacher_sum(X, s, q)
        upper = (B**q / n) * spectral_norm(
            T, restarts=norm_restarts, iters=400, tol=1e-15
        )
        lower = _sup_rank_one(X, s, q, B, rng, pga_restarts, pga_iters, pga_step)
        rows.append(ChainDraw(lower=lower, upper=upper, max_entry=max_abs_entry(T)))
    bx = float(np.linalg.norm(X, axis=1).max())
    return ChainResult(draws=rows, max_entry_rhs=math.sqrt(n) * bx**q)
