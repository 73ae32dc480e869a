"""Comparison methods: random polynomial feature maps with ridge regression,
a down-projection variant, exact polynomial kernel ridge regression, and
degree-2 factorization machines.

A random feature is phi_f(x) = prod_{j=1}^{p_f} <s_j^f, x> with sign vectors
s_j^f of i.i.d. +-1 entries; the map stacks r such features scaled by
1/sqrt(r). In expectation phi(x)^T phi(y) equals <x,y>^p for homogeneous
degree-p maps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .model import TmParams
from .objective import loss_values_grads
from .solvers import BatchSolverConfig, SolverError, minimize_vector

POLICIES = ("homogeneous", "stratified")


@dataclass(frozen=True)
class FeatureMap:
    """Realized random feature map.

    blocks maps degree p to a (count_p, p, d) array of sign vectors; output
    columns are ordered by ascending degree, with one unscaled constant
    column appended last when has_constant is set. scale multiplies every
    random feature (1/sqrt(r) with r the random-feature count).
    """

    d: int
    blocks: dict[int, np.ndarray]
    scale: float
    seed: int
    policy: str
    has_constant: bool = False
    projection: np.ndarray | None = None
    projection_seed: int | None = None

    @property
    def num_random_features(self) -> int:
        return sum(b.shape[0] for b in self.blocks.values())

    @property
    def num_output_features(self) -> int:
        if self.projection is not None:
            return self.projection.shape[1]
        return self.num_random_features + int(self.has_constant)

    @property
    def degrees(self) -> list[int]:
        out = []
        for p in sorted(self.blocks):
            out.extend([p] * self.blocks[p].shape[0])
        if self.has_constant:
            out.append(0)
        return out

    def descriptor(self) -> dict:
        """Seeded regeneration recipe instead of weight storage."""
        q = max(self.blocks) if self.blocks else 0
        out = {
            "seed": self.seed,
            "d": self.d,
            "q": q,
            "r": self.num_random_features,
            "policy": self.policy,
        }
        if self.projection is not None:
            out["projection_seed"] = self.projection_seed
            out["projection_dims"] = list(self.projection.shape)
        return out


def kk_map(seed: int, d: int, q: int, r: int, degree_policy: str = "homogeneous") -> FeatureMap:
    """Draw r random sign-product features.

    homogeneous: every feature has degree q. stratified: r is split evenly
    across degrees 1..q (remainder to the lowest degrees) and one constant
    feature is appended for the affine term.
    """
    if r < 1:
        raise ValueError(f"feature count must be >= 1, got {r}")
    if d < 1 or q < 1:
        raise ValueError(f"need d >= 1 and q >= 1, got d={d}, q={q}")
    if degree_policy not in POLICIES:
        raise ValueError(f"degree_policy must be one of {POLICIES}, got {degree_policy!r}")
    rng = np.random.default_rng(seed)
    blocks = {}
    if degree_policy == "homogeneous":
        counts = {q: r}
    else:
        base, rem = divmod(r, q)
        counts = {p: base + (1 if p <= rem else 0) for p in range(1, q + 1)}
        counts = {p: c for p, c in counts.items() if c > 0}
    for p in sorted(counts):
        blocks[p] = rng.choice([-1.0, 1.0], size=(counts[p], p, d))
    return FeatureMap(
        d=d,
        blocks=blocks,
        scale=1.0 / np.sqrt(r),
        seed=seed,
        policy=degree_policy,
        has_constant=(degree_policy == "stratified"),
    )


def apply_map(fmap: FeatureMap, X) -> np.ndarray:
    """Feature matrix for every row of X, shape (n, output feature count)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != fmap.d:
        raise ValueError(f"input has {X.shape[1]} columns, map expects {fmap.d}")
    n = X.shape[0]
    cols = []
    for p in sorted(fmap.blocks):
        A = np.einsum("nd,fpd->nfp", X, fmap.blocks[p])
        cols.append(fmap.scale * A.prod(axis=2))
    if fmap.has_constant:
        cols.append(np.ones((n, 1)))
    Z = np.hstack(cols) if cols else np.empty((n, 0))
    if fmap.projection is not None:
        Z = Z @ fmap.projection
    return Z


def craftmaps_project(map_up: FeatureMap, seed: int) -> FeatureMap:
    """Attach a dense Gaussian down-projection to a 4x up-projected map.

    The up map's output count R_up must be divisible by 4; the projection has
    i.i.d. Normal(0, 1/R_down) entries with R_down = R_up / 4, which keeps
    squared lengths in expectation.
    """
    if map_up.projection is not None:
        raise ValueError("map already has a projection attached")
    r_up = map_up.num_output_features
    if r_up % 4 != 0:
        raise ValueError(f"up-projected feature count {r_up} is not divisible by 4")
    r_down = r_up // 4
    rng = np.random.default_rng(seed)
    P = rng.normal(0.0, np.sqrt(1.0 / r_down), size=(r_up, r_down))
    return replace(map_up, projection=P, projection_seed=seed)


def ridge_on_features(Z, y, lam_p: float, task: str = "regression") -> np.ndarray:
    """Weights over feature columns: the regularized least-squares solution
    (Z^T Z + lam' I) w = Z^T y for regression, or the minimizer of mean
    logistic loss plus lam'||w||^2 for classification (batch solver)."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if not lam_p > 0:
        raise ValueError(f"ridge parameter must be positive, got {lam_p}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("feature matrix contains non-finite values")
    r = Z.shape[1]
    if task == "regression":
        H = Z.T @ Z + lam_p * np.eye(r)
        try:
            c, low = scipy.linalg.cho_factor(H)
        except scipy.linalg.LinAlgError as e:
            raise SolverError(f"ridge system not positive definite: {e}") from e
        return scipy.linalg.cho_solve((c, low), Z.T @ y)

    n = Z.shape[0]

    def fun(w):
        f = Z @ w
        vals, dvals = loss_values_grads("logistic", f, y)
        value = float(vals.sum() / n) + lam_p * float(w @ w)
        grad = Z.T @ (dvals / n) + 2.0 * lam_p * w
        return value, grad

    res = minimize_vector(fun, np.zeros(r), BatchSolverConfig(max_iters=500))
    return res.w


def krr_poly(
    Xtrain,
    y,
    Xtest,
    q: int,
    lam_p: float,
    cap: int = 40000,
    seed: int = 0,
) -> np.ndarray:
    """Kernel ridge regression with k(x, z) = (x.z + 1)^q.

    Training sets larger than cap are subsampled to cap rows with the seeded
    generator before solving (K + lam' I) alpha = y.
    """
    X = np.asarray(Xtrain, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    Xt = np.atleast_2d(np.asarray(Xtest, dtype=np.float64))
    if not lam_p > 0:
        raise ValueError(f"ridge parameter must be positive, got {lam_p}")
    n = X.shape[0]
    if n > cap:
        keep = np.sort(np.random.default_rng(seed).choice(n, size=cap, replace=False))
        X, y = X[keep], y[keep]
    K = (X @ X.T + 1.0) ** q
    K[np.diag_indices_from(K)] += lam_p
    try:
        c, low = scipy.linalg.cho_factor(K)
    except scipy.linalg.LinAlgError as e:
        K0 = (X @ X.T + 1.0) ** q
        if np.all(np.isfinite(K0)):
            detail = f"condition number {np.linalg.cond(K0):.3e}"
        else:
            detail = "kernel matrix has non-finite entries"
        raise SolverError(f"kernel factorization failed ({detail}): {e}") from e
    alpha = scipy.linalg.cho_solve((c, low), y)
    return ((Xt @ X.T + 1.0) ** q) @ alpha


# ---------------------------------------------------------------------------
# degree-2 factorization machines
# ---------------------------------------------------------------------------

@dataclass
class FmParams:
    """w0 + w.x + sum over factor columns f of the pairwise-only interaction
    term; V has shape (d, m)."""

    w0: float
    w: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64).ravel()
        self.V = np.asarray(self.V, dtype=np.float64)
        if self.V.ndim != 2 or self.V.shape[0] != self.w.size:
            raise ValueError(f"V must have shape ({self.w.size}, m), got {self.V.shape}")
        if self.V.shape[1] < 1:
            raise ValueError("factor count m must be >= 1")

    @property
    def d(self) -> int:
        return self.w.size

    @property
    def m(self) -> int:
        return self.V.shape[1]


def fm2_eval_batch(params: FmParams, X) -> np.ndarray:
    """Pairwise interactions via the O(ndm) identity
    sum_{i<j} <v_i, v_j> x_i x_j = 0.5 * sum_f [ (sum_i V_if x_i)^2 - sum_i V_if^2 x_i^2 ]."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.d:
        raise ValueError(f"input has {X.shape[1]} columns, expected {params.d}")
    P = X @ params.V
    pair = 0.5 * ((P**2).sum(axis=1) - (X**2) @ (params.V**2).sum(axis=1))
    return params.w0 + X @ params.w + pair


def fm2_eval(params: FmParams, x) -> float:
    return float(fm2_eval_batch(params, np.asarray(x, dtype=np.float64)[None, :])[0])


def fm2_flatten(params: FmParams) -> np.ndarray:
    return np.concatenate([[params.w0], params.w, params.V.ravel()])


def fm2_unflatten(vec, d: int, m: int) -> FmParams:
    vec = np.asarray(vec, dtype=np.float64).ravel()
    if vec.size != 1 + d + d * m:
        raise ValueError(f"vector has length {vec.size}, expected {1 + d + d * m}")
    return FmParams(w0=float(vec[0]), w=vec[1 : 1 + d].copy(),
                    V=vec[1 + d :].reshape(d, m).copy())


def fm2_objective(data, lam: float, m: int, loss: str = "squared"):
    """Mean loss + lam(||w||^2 + ||V||_F^2) over the flattened (w0, w, V)
    vector; the intercept w0 stays unregularized, matching the main model's
    objective. Returns fun(vec) -> (value, grad)."""
    X, y = data.X, data.y
    n, d = X.shape
    if m < 1:
        raise ValueError("factor count m must be >= 1")
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    Xsq = X**2

    def fun(vec):
        params = fm2_unflatten(vec, d, m)
        P = X @ params.V
        f = params.w0 + X @ params.w + 0.5 * (
            (P**2).sum(axis=1) - Xsq @ (params.V**2).sum(axis=1)
        )
        vals, dvals = loss_values_grads(loss, f, y)
        value = float(vals.sum() / n) + lam * float(params.w @ params.w) + lam * float(
            np.vdot(params.V, params.V)
        )
        delta = dvals / n
        g_w0 = float(delta.sum())
        g_w = X.T @ delta + 2.0 * lam * params.w
        g_V = X.T @ (delta[:, None] * P) - (Xsq.T @ delta)[:, None] * params.V
        g_V += 2.0 * lam * params.V
        return value, np.concatenate([[g_w0], g_w, g_V.ravel()])

    return fun


def fm2_fit(
    data,
    lam: float,
    m: int,
    loss: str = "squared",
    cfg: BatchSolverConfig | None = None,
    alpha: float = 0.1,
    seed: int = 0,
) -> FmParams:
    """Fit a degree-2 factorization machine with the batch solver."""
    d = data.X.shape[1]
    fun = fm2_objective(data, lam, m, loss)
    rng = np.random.default_rng(seed)
    init = FmParams(w0=0.0, w=rng.normal(0.0, alpha, size=d),
                    V=rng.normal(0.0, alpha, size=(d, m)))
    res = minimize_vector(fun, fm2_flatten(init), cfg or BatchSolverConfig(max_iters=300))
    return fm2_unflatten(res.w, d, m)
