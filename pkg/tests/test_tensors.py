import numpy as np
import pytest

from tensor_machines import tensors


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def segre_oracle(vectors):
    """Nested-loop recomputation of the outer product, no vectorization."""
    d = len(vectors[0])
    q = len(vectors)
    out = np.empty((d,) * q)
    for idx in np.ndindex(*out.shape):
        prod = 1.0
        for j, i in enumerate(idx):
            prod *= vectors[j][i]
        out[idx] = prod
    return out


def matrix_norm_oracle(M, iters=5000, seed=123):
    """Largest singular value via eigen-iteration on M^T M."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=M.shape[1])
    v /= np.linalg.norm(v)
    G = M.T @ M
    for _ in range(iters):
        w = G @ v
        v = w / np.linalg.norm(w)
    return float(np.sqrt(v @ G @ v))


# ---------------------------------------------------------------------------
# segre / self_power
# ---------------------------------------------------------------------------

def test_segre_single_vector_is_identity():
    t = tensors.segre([(1.0, 2.0)])
    assert t.degree == 1 and t.dim == 2
    np.testing.assert_array_equal(t.entries, [1.0, 2.0])


def test_segre_hand_expansion():
    t = tensors.segre([(1.0, 2.0), (1.0, 2.0)])
    np.testing.assert_array_equal(t.as_array(), [[1.0, 2.0], [2.0, 4.0]])


def test_segre_matches_nested_loop_oracle():
    rng = np.random.default_rng(0)
    for q in (2, 3, 4):
        vs = [rng.normal(size=3) for _ in range(q)]
        t = tensors.segre(vs)
        np.testing.assert_allclose(t.as_array(), segre_oracle(vs), rtol=1e-14)


def test_flat_index_order_first_index_slowest():
    # entry (i_1, ..., i_q) must live at flat position sum_k i_k * d**(q-k)
    rng = np.random.default_rng(1)
    vs = [rng.normal(size=3) for _ in range(3)]
    t = tensors.segre(vs)
    d, q = t.dim, t.degree
    for idx in [(0, 0, 0), (0, 0, 2), (0, 1, 0), (2, 1, 0)]:
        flat = sum(i * d ** (q - 1 - k) for k, i in enumerate(idx))
        assert t.entries[flat] == t.as_array()[idx]


def test_self_power_basis_vector():
    t = tensors.self_power((1.0, 0.0), 3)
    expect = np.zeros((2, 2, 2))
    expect[0, 0, 0] = 1.0
    np.testing.assert_array_equal(t.as_array(), expect)


def test_self_power_equals_segre_of_copies():
    rng = np.random.default_rng(2)
    x = rng.normal(size=4)
    a = tensors.self_power(x, 3)
    b = tensors.segre([x, x, x])
    np.testing.assert_array_equal(a.entries, b.entries)


def test_size_cap_rejected():
    with pytest.raises(ValueError, match="cap"):
        tensors.self_power(np.ones(10), 8)


def test_entries_are_read_only():
    t = tensors.segre([(1.0, 2.0)])
    with pytest.raises(ValueError):
        t.entries[0] = 5.0


def test_segre_dimension_mismatch():
    with pytest.raises(ValueError):
        tensors.segre([np.ones(2), np.ones(3)])


# ---------------------------------------------------------------------------
# inner
# ---------------------------------------------------------------------------

def test_inner_rank_one_factorization():
    rng = np.random.default_rng(3)
    u, v, x = rng.normal(size=(3, 5))
    got = tensors.inner(tensors.segre([u, v]), tensors.self_power(x, 2))
    np.testing.assert_allclose(got, (u @ x) * (v @ x), rtol=1e-12)


def test_inner_of_rank_one_with_itself_is_product_of_squared_norms():
    rng = np.random.default_rng(4)
    for q in (1, 2, 3, 4):
        vs = [rng.normal(size=4) for _ in range(q)]
        t = tensors.segre(vs)
        expect = np.prod([v @ v for v in vs])
        np.testing.assert_allclose(tensors.inner(t, t), expect, rtol=1e-12)


def test_inner_matches_flat_dot():
    rng = np.random.default_rng(5)
    a = tensors.segre([rng.normal(size=3) for _ in range(3)])
    b = tensors.segre([rng.normal(size=3) for _ in range(3)])
    np.testing.assert_allclose(
        tensors.inner(a, b), float(a.entries @ b.entries), rtol=1e-14
    )


def test_inner_of_two_rank_ones_is_product_of_dots():
    rng = np.random.default_rng(6)
    for trial in range(20):
        q = int(rng.integers(1, 5))
        d = int(rng.integers(2, 6))
        us = [rng.normal(size=d) for _ in range(q)]
        vs = [rng.normal(size=d) for _ in range(q)]
        got = tensors.inner(tensors.segre(us), tensors.segre(vs))
        expect = np.prod([u @ v for u, v in zip(us, vs)])
        np.testing.assert_allclose(got, expect, rtol=1e-12, atol=1e-12)


def test_inner_shape_mismatch():
    a = tensors.self_power(np.ones(2), 2)
    b = tensors.self_power(np.ones(3), 2)
    with pytest.raises(ValueError):
        tensors.inner(a, b)


# ---------------------------------------------------------------------------
# spectral_norm
# ---------------------------------------------------------------------------

def test_spectral_norm_identity_matrix():
    t = tensors.DenseTensor(degree=2, dim=2, entries=np.eye(2).ravel())
    np.testing.assert_allclose(tensors.spectral_norm(t), 1.0, rtol=1e-10)


def test_spectral_norm_rank_one_attains_factor_norms():
    rng = np.random.default_rng(7)
    u, v, w = rng.normal(size=(3, 4))
    t = tensors.segre([u, v, w])
    expect = np.linalg.norm(u) * np.linalg.norm(v) * np.linalg.norm(w)
    np.testing.assert_allclose(tensors.spectral_norm(t), expect, rtol=1e-9)


def test_spectral_norm_matches_eigen_iteration_oracle_q2():
    rng = np.random.default_rng(8)
    for trial in range(5):
        M = rng.normal(size=(4, 4))
        t = tensors.DenseTensor(degree=2, dim=4, entries=M.ravel())
        np.testing.assert_allclose(
            tensors.spectral_norm(t), matrix_norm_oracle(M), atol=1e-8, rtol=1e-8
        )


def test_spectral_norm_orthogonal_symmetric_q3():
    # For a^(3) + b^(3) with a, b orthogonal the sup is max(||a||^3, ||b||^3):
    # writing the probe in the (a, b) plane reduces the problem to maximizing
    # s^3 c1^3 + t^3 c2^3 on the unit circle, attained at a vertex.
    rng = np.random.default_rng(9)
    Q, _ = np.linalg.qr(rng.normal(size=(5, 2)))
    a, b = 1.3 * Q[:, 0], 0.7 * Q[:, 1]
    t = tensors.rademacher_sum([a, b], [1.0, 1.0], 3)
    np.testing.assert_allclose(tensors.spectral_norm(t), 1.3**3, rtol=1e-9)


def test_spectral_norm_bounded_by_frobenius():
    rng = np.random.default_rng(10)
    for q in (2, 3, 4):
        t = tensors.DenseTensor(degree=q, dim=3, entries=rng.normal(size=3**q))
        assert tensors.spectral_norm(t) <= tensors.frobenius(t) + 1e-12


def test_spectral_norm_absolute_homogeneity():
    rng = np.random.default_rng(11)
    t = tensors.DenseTensor(degree=3, dim=3, entries=rng.normal(size=27))
    base = tensors.spectral_norm(t)
    for c in (2.0, -3.5, 0.25):
        scaled = tensors.DenseTensor(degree=3, dim=3, entries=c * t.entries)
        np.testing.assert_allclose(tensors.spectral_norm(scaled), abs(c) * base, rtol=1e-9)


def test_spectral_norm_dominates_max_entry_q2():
    rng = np.random.default_rng(12)
    for trial in range(5):
        M = rng.normal(size=(5, 5))
        t = tensors.DenseTensor(degree=2, dim=5, entries=M.ravel())
        assert tensors.max_abs_entry(t) <= tensors.spectral_norm(t) + 1e-10


def test_spectral_norm_rejects_non_finite():
    ent = np.ones(4)
    ent[2] = np.nan
    t = tensors.DenseTensor(degree=2, dim=2, entries=ent)
    with pytest.raises(ValueError):
        tensors.spectral_norm(t)


# ---------------------------------------------------------------------------
# rademacher_sum
# ---------------------------------------------------------------------------

def test_rademacher_sum_single_point():
    rng = np.random.default_rng(13)
    x = rng.normal(size=3)
    t = tensors.rademacher_sum([x], [1.0], 3)
    np.testing.assert_array_equal(t.entries, tensors.self_power(x, 3).entries)


def test_rademacher_sum_cancellation():
    x = np.array([1.0, -2.0, 0.5])
    t = tensors.rademacher_sum([x, x], [1.0, -1.0], 2)
    np.testing.assert_array_equal(t.entries, np.zeros(9))


def test_rademacher_sum_matches_loop_accumulation_oracle():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(5, 4))
    s = rng.choice([-1.0, 1.0], size=5)
    expect = np.zeros((4, 4))
    for i in range(5):
        expect += s[i] * np.outer(X[i], X[i])
    t = tensors.rademacher_sum(X, s, 2)
    np.testing.assert_allclose(t.as_array(), expect, rtol=1e-14)


def test_rademacher_sum_validates_signs():
    with pytest.raises(ValueError):
        tensors.rademacher_sum([np.ones(2)], [0.5], 2)
    with pytest.raises(ValueError):
        tensors.rademacher_sum([np.ones(2), np.ones(2)], [1.0], 2)
