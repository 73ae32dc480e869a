import numpy as np
import pytest

from tensor_machines import model
from tensor_machines.objective import (
    Loss,
    ObjectiveConfig,
    loss_value_grad,
    make_flat_objective,
    objective_value_grad,
)


class Data:
    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)


def random_setup(rng, n=8, d=4, q=3, r=2, lam=0.01, loss="squared"):
    p = model.init_random(d, q, r, alpha=0.5, seed=int(rng.integers(10**6)))
    p.bias = float(rng.normal())
    X = rng.normal(size=(n, d))
    if loss == "squared":
        y = rng.normal(size=n)
    else:
        y = rng.choice([-1.0, 1.0], size=n)
    return p, Data(X, y), ObjectiveConfig(lam=lam, loss=Loss(loss))


def fd_objective_gradient(params, data, cfg, step=1e-6):
    fun = make_flat_objective(data, cfg, (params.d, params.q, params.r))
    w = model.flatten(params)
    g = np.empty_like(w)
    for k in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[k] += step
        wm[k] -= step
        g[k] = (fun(wp)[0] - fun(wm)[0]) / (2 * step)
    return g


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def test_squared_loss_at_target():
    assert loss_value_grad(Loss("squared"), 2.5, 2.5) == (0.0, 0.0)


def test_squared_loss_half_factor():
    v, g = loss_value_grad(Loss("squared"), 3.0, 1.0)
    assert v == 2.0 and g == 2.0


def test_logistic_loss_at_zero():
    v, g = loss_value_grad(Loss("logistic"), 0.0, 1.0)
    np.testing.assert_allclose(v, np.log(2.0), rtol=1e-15)
    np.testing.assert_allclose(g, -0.5, rtol=1e-15)


def test_logistic_loss_no_overflow_and_fd_sign():
    v, g = loss_value_grad(Loss("logistic"), 50.0, -1.0)
    assert np.isfinite(v) and abs(v - 50.0) < 1e-15
    step = 1e-6
    vp, _ = loss_value_grad(Loss("logistic"), 50.0 + step, -1.0)
    vm, _ = loss_value_grad(Loss("logistic"), 50.0 - step, -1.0)
    np.testing.assert_allclose(g, (vp - vm) / (2 * step), rtol=1e-4)
    assert g > 0


def test_logistic_loss_fd_random():
    rng = np.random.default_rng(30)
    step = 1e-6
    for _ in range(20):
        f = float(rng.normal() * 3)
        y = float(rng.choice([-1.0, 1.0]))
        _, g = loss_value_grad(Loss("logistic"), f, y)
        vp, _ = loss_value_grad(Loss("logistic"), f + step, y)
        vm, _ = loss_value_grad(Loss("logistic"), f - step, y)
        np.testing.assert_allclose(g, (vp - vm) / (2 * step), atol=1e-7)


def test_logistic_rejects_bad_label():
    with pytest.raises(ValueError):
        loss_value_grad(Loss("logistic"), 0.0, 0.0)


def test_unknown_loss_kind():
    with pytest.raises(ValueError):
        Loss("hinge")


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------

def test_zero_params_squared_objective():
    rng = np.random.default_rng(31)
    y = rng.normal(size=6)
    data = Data(rng.normal(size=(6, 3)), y)
    p = model.TmParams(bias=0.0, linear=np.zeros(3))
    cfg = ObjectiveConfig(lam=0.3, loss=Loss("squared"))
    v, g = objective_value_grad(p, data, cfg)
    np.testing.assert_allclose(v, 0.5 * np.mean(y**2), rtol=1e-14)


def test_lambda_zero_single_point_chain_rule():
    rng = np.random.default_rng(32)
    p, data, _ = random_setup(rng, n=1, lam=0.0)
    cfg = ObjectiveConfig(lam=0.0, loss=Loss("squared"))
    v, g = objective_value_grad(p, data, cfg)
    f = model.evaluate(p, data.X[0])
    lv, lg = loss_value_grad(cfg.loss, f, float(data.y[0]))
    assert v == pytest.approx(lv, rel=1e-14)
    expect = model.flatten_grad(model.grad_point(p, data.X[0], lg))
    np.testing.assert_allclose(model.flatten_grad(g), expect, rtol=1e-12, atol=1e-14)


def test_objective_gradient_matches_finite_differences():
    rng = np.random.default_rng(33)
    for loss in ("squared", "logistic"):
        p, data, cfg = random_setup(rng, loss=loss, lam=0.05)
        _, g = objective_value_grad(p, data, cfg)
        fd = fd_objective_gradient(p, data, cfg)
        scale = max(1.0, np.abs(fd).max())
        np.testing.assert_allclose(
            model.flatten_grad(g) / scale, fd / scale, atol=1e-6
        )


def test_regularizer_gradient_and_bias_exempt():
    rng = np.random.default_rng(34)
    p, data, _ = random_setup(rng, n=4)
    lam = 0.7
    cfg0 = ObjectiveConfig(lam=0.0, loss=Loss("squared"))
    cfg1 = ObjectiveConfig(lam=lam, loss=Loss("squared"))
    _, g0 = objective_value_grad(p, data, cfg0)
    _, g1 = objective_value_grad(p, data, cfg1)
    assert g1.bias == g0.bias
    np.testing.assert_allclose(g1.linear - g0.linear, 2 * lam * p.linear, rtol=1e-12)
    for deg in p.factors:
        np.testing.assert_allclose(
            g1.factors[deg] - g0.factors[deg], 2 * lam * p.factors[deg], rtol=1e-12
        )


def test_lambda_monotonicity():
    rng = np.random.default_rng(35)
    p, data, _ = random_setup(rng)
    values = [
        objective_value_grad(p, data, ObjectiveConfig(lam=lam, loss=Loss("squared")))[0]
        for lam in (0.0, 0.01, 0.1, 1.0, 10.0)
    ]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_partition_exactness():
    # integer lattice data, dyadic sizes and lambda: the weighted average of
    # the partition's data terms plus one regularizer reproduces the full
    # objective with exact float equality
    rng = np.random.default_rng(36)
    n, d = 16, 3
    X = rng.integers(-3, 4, size=(n, d)).astype(np.float64)
    y = rng.integers(-2, 3, size=n).astype(np.float64)
    data = Data(X, y)
    p = model.TmParams(
        bias=0.5,
        linear=rng.integers(-2, 3, size=d) / 4.0,
        factors={2: rng.integers(-2, 3, size=(2, 2, d)) / 4.0},
    )
    cfg = ObjectiveConfig(lam=0.25, loss=Loss("squared"))
    reg = 0.25 * float(p.linear @ p.linear) + 0.25 * float(
        np.vdot(p.factors[2], p.factors[2])
    )
    full, _ = objective_value_grad(p, data, cfg)
    cfg0 = ObjectiveConfig(lam=0.0, loss=Loss("squared"))
    blocks = [np.arange(0, 8), np.arange(8, 16)]
    parts = [objective_value_grad(p, data, cfg0, index_set=b)[0] for b in blocks]
    recombined = (8 * parts[0] + 8 * parts[1]) / 16 + reg
    assert full == recombined


def test_index_set_subset_and_errors():
    rng = np.random.default_rng(37)
    p, data, cfg = random_setup(rng, n=10)
    sub = Data(data.X[2:5], data.y[2:5])
    v_idx, g_idx = objective_value_grad(p, data, cfg, index_set=[2, 3, 4])
    v_sub, g_sub = objective_value_grad(p, sub, cfg)
    assert v_idx == v_sub
    np.testing.assert_array_equal(
        model.flatten_grad(g_idx), model.flatten_grad(g_sub)
    )
    with pytest.raises(ValueError):
        objective_value_grad(p, data, cfg, index_set=[])
    with pytest.raises(ValueError):
        objective_value_grad(p, data, cfg, index_set=[100])


def test_negative_lambda_rejected():
    with pytest.raises(ValueError):
        ObjectiveConfig(lam=-0.1, loss=Loss("squared"))
