"""Loss functions and the regularized empirical risk.

The training objective is

    (1/m) sum_{i in S} loss(f(x_i), y_i)
        + lam * ||w1||^2 + lam * sum_{p,i,j} ||W[p][i,j]||^2

over an index set S (the full data set by default). The bias is never
regularized. A mini-batch objective keeps the full regularizer so its
gradient is an unbiased estimate of the full gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .model import TmGradient, TmParams, evaluate_batch, flatten_grad, grad_batch, unflatten

LOSS_KINDS = ("squared", "logistic")


@dataclass(frozen=True)
class Loss:
    kind: str

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class ObjectiveConfig:
    lam: float
    loss: Loss

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if isinstance(self.loss, str):
            object.__setattr__(self, "loss", Loss(self.loss))


def _kind(loss) -> str:
    return loss.kind if isinstance(loss, Loss) else Loss(loss).kind


def loss_values_grads(loss, f, y) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-point loss values and d loss / d f."""
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if _kind(loss) == "squared":
        resid = f - y
        return 0.5 * resid**2, resid
    if not np.all(np.isin(y, (-1.0, 1.0))):
        bad = np.unique(y[~np.isin(y, (-1.0, 1.0))])
        raise ValueError(f"logistic loss needs labels in {{-1,+1}}, got {bad}")
    # softplus(z) = max(z,0) + log1p(exp(-|z|)) avoids overflow for large |z|
    z = -y * f
    value = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return value, -y * expit(z)


def loss_value_grad(loss, f: float, y: float) -> tuple[float, float]:
    """Single-point loss value and derivative with respect to the prediction."""
    v, g = loss_values_grads(loss, np.array([f]), np.array([y]))
    return float(v[0]), float(g[0])


def objective_value_grad(
    params: TmParams,
    data,
    cfg: ObjectiveConfig,
    index_set=None,
) -> tuple[float, TmGradient]:
    """Regularized risk and its gradient over data rows (or a subset of them).

    data is anything with array attributes X (n, d) and y (n,).
    """
    X, y = data.X, data.y
    if index_set is not None:
        idx = np.asarray(index_set, dtype=np.intp)
        if idx.size == 0:
            raise ValueError("index set is empty")
        if idx.min() < 0 or idx.max() >= X.shape[0]:
            raise ValueError("index set out of range")
        X, y = X[idx], y[idx]
    m = X.shape[0]
    if m == 0:
        raise ValueError("objective over an empty data set")

    f = evaluate_batch(params, X)
    vals, dvals = loss_values_grads(cfg.loss, f, y)
    value = float(vals.sum() / m)
    g = grad_batch(params, X, dvals / m)

    lam = cfg.lam
    value += lam * float(params.linear @ params.linear)
    g.linear += 2.0 * lam * params.linear
    for p, block in params.factors.items():
        value += lam * float(np.vdot(block, block))
        g.factors[p] += 2.0 * lam * block
    return value, g


def make_flat_objective(data, cfg: ObjectiveConfig, shape: tuple[int, int, int]):
    """Objective as a function of the flattened parameter vector.

    Returns fun(w, index_set=None) -> (value, grad vector); the interface
    every solver consumes.
    """

    def fun(w, index_set=None):
        params = unflatten(w, shape)
        value, g = objective_value_grad(params, data, cfg, index_set)
        return value, flatten_grad(g)

    return fun
