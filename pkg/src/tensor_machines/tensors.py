"""Explicit dense tensor algebra on small instances.

Everything here materializes all d**q entries, so it is only meant for
desk-scale verification work (equivalence tests, norm experiments). The
model and solver code paths never touch this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Hard ceiling on materialized entries; constructors reject anything larger.
DEFAULT_ENTRY_CAP = 10_000_000


def _check_size(dim: int, degree: int, cap: int) -> None:
    if degree < 1:
        raise ValueError(f"tensor degree must be >= 1, got {degree}")
    if dim < 1:
        raise ValueError(f"tensor dimension must be >= 1, got {dim}")
    if dim**degree > cap:
        raise ValueError(
            f"dense tensor with d={dim}, q={degree} has {dim**degree} entries, "
            f"exceeding the cap of {cap}"
        )


@dataclass(frozen=True)
class DenseTensor:
    """Degree-q tensor over R^d stored as a flat row-major array.

    The flat index of entry (i_1, ..., i_q) is sum_k i_k * d**(q-k), i.e.
    the first index varies slowest. Entries are read-only after construction.
    """

    degree: int
    dim: int
    entries: np.ndarray = field(repr=False)
    cap: int = DEFAULT_ENTRY_CAP

    def __post_init__(self):
        _check_size(self.dim, self.degree, self.cap)
        ent = np.ascontiguousarray(self.entries, dtype=np.float64).ravel()
        if ent.size != self.dim**self.degree:
            raise ValueError(
                f"entry array has length {ent.size}, expected "
                f"{self.dim}**{self.degree} = {self.dim ** self.degree}"
            )
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.dim,) * self.degree

    def as_array(self) -> np.ndarray:
        """Multi-dimensional (read-only) view of the entries."""
        return self.entries.reshape(self.shape)


def segre(vectors) -> DenseTensor:
    """Outer product tensor of q vectors: entry (i_1..i_q) = prod_j v_j[i_j]."""
    vs = [np.asarray(v, dtype=np.float64) for v in vectors]
    if len(vs) == 0:
        raise ValueError("segre product needs at least one vector")
    d = vs[0].size
    for v in vs:
        if v.ndim != 1 or v.size != d:
            raise ValueError("all factor vectors must be 1-D with equal length")
    q = len(vs)
    _check_size(d, q, DEFAULT_ENTRY_CAP)
    arr = vs[0]
    for v in vs[1:]:
        arr = np.multiply.outer(arr, v)
    return DenseTensor(degree=q, dim=d, entries=arr.ravel())


def self_power(x, q: int) -> DenseTensor:
    """q-fold outer product of a vector with itself (all degree-q monomials)."""
    return segre([x] * q)


def inner(a: DenseTensor, b: DenseTensor) -> float:
    """Entrywise inner product of two tensors of identical shape."""
    if a.degree != b.degree or a.dim != b.dim:
        raise ValueError(
            f"shape mismatch: (q={a.degree}, d={a.dim}) vs (q={b.degree}, d={b.dim})"
        )
    return float(np.dot(a.entries, b.entries))


def frobenius(t: DenseTensor) -> float:
    return float(np.linalg.norm(t.entries))


def max_abs_entry(t: DenseTensor) -> float:
    return float(np.max(np.abs(t.entries))) if t.entries.size else 0.0


def _contract_all_but(arr: np.ndarray, vecs: list[np.ndarray], j: int) -> np.ndarray:
    # Contracting modes in decreasing order keeps the axis index of mode k
    # equal to k for every remaining mode <= k.
    out = arr
    for k in range(arr.ndim - 1, -1, -1):
        if k == j:
            continue
        out = np.tensordot(out, vecs[k], axes=(k, 0))
    return out


def spectral_norm(
    t: DenseTensor,
    restarts: int = 10,
    iters: int = 200,
    tol: float = 1e-10,
    seed: int = 0,
) -> float:
    """Lower bound on sup |<T, v_1 * ... * v_q>| over unit vectors.

    Runs alternating rank-one power iteration from `restarts` random starts:
    fixing all but one mode, the optimal unit vector for the free mode is the
    normalized contraction, so the objective is non-decreasing and every
    converged value is attained by a feasible rank-one probe. For q=2 the
    iteration is ordinary matrix power iteration and converges to the largest
    singular value.
    """
    if restarts < 1 or iters < 1:
        raise ValueError("restarts and iters must be >= 1")
    if not np.all(np.isfinite(t.entries)):
        raise ValueError("spectral_norm requires finite tensor entries")
    arr = t.as_array()
    q, d = t.degree, t.dim
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(restarts):
        vecs = []
        for _ in range(q):
            v = rng.normal(size=d)
            n = np.linalg.norm(v)
            vecs.append(v / n if n > 0 else np.ones(d) / np.sqrt(d))
        value = 0.0
        for _ in range(iters):
            prev = value
            dead = False
            for j in range(q):
                u = _contract_all_but(arr, vecs, j)
                nu = np.linalg.norm(u)
                if nu == 0.0:
                    dead = True
                    break
                vecs[j] = u / nu
                value = nu
            if dead or abs(value - prev) <= tol * max(1.0, abs(value)):
                break
        best = max(best, value)
    return best


def rademacher_sum(points, signs, q: int) -> DenseTensor:
    """Signed sum of q-fold self outer products, sum_i s_i * x_i^(q)."""
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    s = np.asarray(signs, dtype=np.float64).ravel()
    if s.size != X.shape[0]:
        raise ValueError(f"{X.shape[0]} points but {s.size} signs")
    if not np.all(np.isin(s, (-1.0, 1.0))):
        raise ValueError("signs must all be -1 or +1")
    n, d = X.shape
    _check_size(d, q, DEFAULT_ENTRY_CAP)
    acc = np.zeros((d,) * q)
    for i in range(n):
        term = X[i]
        for _ in range(q - 1):
            term = np.multiply.outer(term, X[i])
        acc += s[i] * term
    return DenseTensor(degree=q, dim=d, entries=acc.ravel())
