"""Tensor machine parameters, forward evaluation, and analytic gradients.

The hypothesis is

    f(x) = w0 + <w1, x> + sum_{p=2}^{q} sum_{i=1}^{r} prod_{j=1}^{p} <W[p][i,j], x>

where each degree-p block holds r*p factor vectors of length d. Batch
evaluation and gradients are fully vectorized; single-point calls are thin
wrappers over the batch path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def param_count(d: int, q: int, r: int) -> int:
    """Total free parameters: 1 + d + sum_{p=2}^q p*r*d."""
    return 1 + d + sum(p * r * d for p in range(2, q + 1))


def _validate_shape(d: int, q: int, r: int) -> None:
    if d < 1:
        raise ValueError(f"input dimension must be >= 1, got {d}")
    if q < 1:
        raise ValueError(f"degree must be >= 1, got {q}")
    if r < 0:
        raise ValueError(f"rank must be >= 0, got {r}")


@dataclass
class TmParams:
    """Parameter container.

    factors maps degree p (2 <= p <= q) to an array of shape (r, p, d);
    factors[p][i, j] is the j-th factor vector of the i-th rank-one term.
    The dict is empty when r == 0 or q < 2.
    """

    bias: float
    linear: np.ndarray
    factors: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=np.float64).ravel()
        d = self.linear.size
        fixed = {}
        for p in sorted(self.factors):
            block = np.asarray(self.factors[p], dtype=np.float64)
            if block.ndim != 3 or block.shape[1] != p or block.shape[2] != d:
                raise ValueError(
                    f"degree-{p} block must have shape (r, {p}, {d}), "
                    f"got {block.shape}"
                )
            fixed[p] = block
        self.factors = fixed
        ranks = {b.shape[0] for b in fixed.values()}
        if len(ranks) > 1:
            raise ValueError(f"inconsistent ranks across degree blocks: {ranks}")
        degrees = sorted(fixed)
        if degrees and degrees != list(range(2, degrees[-1] + 1)):
            raise ValueError(f"degree blocks must cover 2..q contiguously, got {degrees}")

    @property
    def d(self) -> int:
        return self.linear.size

    @property
    def q(self) -> int:
        return max(self.factors) if self.factors else 1

    @property
    def r(self) -> int:
        return next(iter(self.factors.values())).shape[0] if self.factors else 0

    @property
    def num_params(self) -> int:
        return 1 + self.d + sum(b.size for b in self.factors.values())

    def copy(self) -> "TmParams":
        return TmParams(
            bias=self.bias,
            linear=self.linear.copy(),
            factors={p: b.copy() for p, b in self.factors.items()},
        )


@dataclass
class TmGradient:
    """Partial derivatives laid out exactly like TmParams."""

    bias: float
    linear: np.ndarray
    factors: dict[int, np.ndarray] = field(default_factory=dict)


def zeros_like(params: TmParams) -> TmGradient:
    return TmGradient(
        bias=0.0,
        linear=np.zeros(params.d),
        factors={p: np.zeros_like(b) for p, b in params.factors.items()},
    )


def _check_input(params: TmParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != params.d:
        raise ValueError(f"input has shape {X.shape}, expected (n, {params.d})")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    return X


def evaluate_batch(params: TmParams, X) -> np.ndarray:
    """Predictions for every row of X, shape (n,)."""
    X = _check_input(params, X)
    f = params.bias + X @ params.linear
    for block in params.factors.values():
        # A[n, i, j] = <factor vector (i, j), x_n>
        A = np.einsum("nd,rpd->nrp", X, block)
        f = f + A.prod(axis=2).sum(axis=1)
    return f


def evaluate(params: TmParams, x) -> float:
    """Prediction for a single point."""
    return float(evaluate_batch(params, np.asarray(x, dtype=np.float64)[None, :])[0])


def _cofactors(A: np.ndarray) -> np.ndarray:
    """Leave-one-out products along the last axis, C[..., j] = prod_{k != j} A[..., k].

    Built from prefix and suffix running products so zero entries are handled
    exactly (no division by inner products).
    """
    L = np.ones_like(A)
    S = np.ones_like(A)
    if A.shape[-1] > 1:
        np.cumprod(A[..., :-1], axis=-1, out=L[..., 1:])
        S[..., :-1] = np.cumprod(A[..., :0:-1], axis=-1)[..., ::-1]
    return L * S


def grad_batch(params: TmParams, X, dloss) -> TmGradient:
    """Sum over rows of dloss_n * (d f(x_n) / d params)."""
    X = _check_input(params, X)
    dloss = np.asarray(dloss, dtype=np.float64).ravel()
    if dloss.size != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {dloss.size} loss derivatives")
    g = TmGradient(bias=float(dloss.sum()), linear=dloss @ X, factors={})
    for p, block in params.factors.items():
        A = np.einsum("nd,rpd->nrp", X, block)
        C = _cofactors(A)
        g.factors[p] = np.einsum("nrp,n,nd->rpd", C, dloss, X)
    return g


def grad_point(params: TmParams, x, dloss: float) -> TmGradient:
    """Gradient of dloss * f(x) with respect to every parameter."""
    return grad_batch(params, np.asarray(x, dtype=np.float64)[None, :], [dloss])


def init_random(d: int, q: int, r: int, alpha: float, seed: int) -> TmParams:
    """Zero bias, all other coordinates i.i.d. Normal(0, alpha^2), seeded."""
    _validate_shape(d, q, r)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    rng = np.random.default_rng(seed)
    linear = rng.normal(0.0, alpha, size=d)
    factors = {}
    if r >= 1:
        for p in range(2, q + 1):
            factors[p] = rng.normal(0.0, alpha, size=(r, p, d))
    return TmParams(bias=0.0, linear=linear, factors=factors)


def flatten(params: TmParams) -> np.ndarray:
    """Single vector: bias, linear, then each degree block raveled row-major
    (rank slot slowest, factor position, coordinate fastest)."""
    parts = [np.array([params.bias]), params.linear]
    parts.extend(params.factors[p].ravel() for p in sorted(params.factors))
    return np.concatenate(parts)


def flatten_grad(g: TmGradient) -> np.ndarray:
    parts = [np.array([g.bias]), g.linear]
    parts.extend(g.factors[p].ravel() for p in sorted(g.factors))
    return np.concatenate(parts)


def unflatten(vec, shape: tuple[int, int, int]) -> TmParams:
    """Inverse of flatten for a model of shape (d, q, r)."""
    d, q, r = shape
    _validate_shape(d, q, r)
    vec = np.asarray(vec, dtype=np.float64).ravel()
    expected = param_count(d, q, r)
    if vec.size != expected:
        raise ValueError(f"vector has length {vec.size}, expected {expected}")
    bias = float(vec[0])
    linear = vec[1 : 1 + d].copy()
    factors = {}
    pos = 1 + d
    if r >= 1:
        for p in range(2, q + 1):
            n = p * r * d
            factors[p] = vec[pos : pos + n].reshape(r, p, d).copy()
            pos += n
    return TmParams(bias=bias, linear=linear, factors=factors)


def save_model(params: TmParams, path: str, alpha: float, seed: int) -> None:
    """Versioned flat text format: one header line, one float per line after.

    Floats are printed with repr, which is the shortest string that round
    trips to the exact same double, so save/load is bit-exact.
    """
    vec = flatten(params)
    with open(path, "w") as fh:
        fh.write(f"tm v1 {params.d} {params.q} {params.r} {repr(float(alpha))} {seed}\n")
        for v in vec:
            fh.write(repr(float(v)) + "\n")


def load_model(path: str) -> tuple[TmParams, float, int]:
    """Read a saved model; returns (params, alpha, seed)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 7 or header[0] != "tm" or header[1] != "v1":
            raise ValueError(f"unrecognized model header in {path}")
        d, q, r = int(header[2]), int(header[3]), int(header[4])
        alpha = float(header[5])
        seed = int(header[6])
        values = [float(line) for line in fh if line.strip()]
    return unflatten(np.array(values), (d, q, r)), alpha, seed
