import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from subtraj.errors import ConfigError, NonFiniteError, ShapeError, UnsupportedOperation
from subtraj.landscape.critical import mc_critical_point
from subtraj.models import (REGISTRY, build_sensing_ensemble, ensemble_from_matrices,
                            eval_hessian, eval_subgradient, eval_value, fd_gradient,
                            make_model, sigmoid)
from subtraj.models.base import fd_hessian
from subtraj.models.boxqp import solve_box_qp

SMOOTH_NAMES = ["matrix-completion-ex1", "linear-nn", "sigmoid-chain", "matrix-sensing",
                "cex-unbounded", "cex-infinite-critical", "sigmoid-two-data", "sigmoid-fig3",
                "quadratic"]


def test_value_examples():
    mc = make_model("matrix-completion-ex1")
    assert eval_value(mc, [0, 0, 0, 0]) == 3.0
    assert eval_value(mc, [1, 1, 1, 1]) == 0.0
    assert eval_value(make_model("sigmoid-two-data"), [0, 0]) == 1.0


def test_subgradient_examples():
    mc = make_model("matrix-completion-ex1")
    s = eval_subgradient(mc, np.zeros(4))
    assert np.all(s.vector == 0) and s.is_unique
    # 1-D counterexample: f'(1) = 1, checked against central differences
    cx = make_model("cex-unbounded")
    g = eval_subgradient(cx, [1.0]).vector[0]
    h = 1e-6
    fd = (cx.value([1 + h]) - cx.value([1 - h])) / (2 * h)
    assert g == pytest.approx(1.0, abs=1e-12)
    assert abs(fd - g) <= 1e-6


def test_l1_exact_factorisation_is_stationary():
    m = make_model("l1-factorization", seed=3)
    u, s, vt = np.linalg.svd(m.M)
    X = (u[:, :1] * s[0])
    Y = vt[:1].T
    x = m.flatten([X, Y])
    sel = eval_subgradient(m, x)
    assert np.allclose(sel.vector, 0)


@pytest.mark.parametrize("name", SMOOTH_NAMES)
def test_gradient_matches_fd(name):
    model = make_model(name)
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.uniform(-2, 2, model.dim)
        if name == "cex-unbounded":
            x = rng.uniform(0.3, 3, 1)
        g = model.gradient(x)
        fd = fd_gradient(model.value, x)
        assert np.linalg.norm(g - fd) <= 1e-5 * (1 + np.linalg.norm(g))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.booleans())
def test_l1_lambda_in_sign_set(seed, scale, exact):
    m = make_model("l1-factorization", seed=seed % 7)
    rng = np.random.default_rng(seed)
    x = scale * rng.standard_normal(m.dim)
    if exact:
        # zero out residual entries by matching one row/column exactly
        X, Y = m.unflatten(x)
        X[:] = 0.0
        x = m.flatten([X, Y])
    Lam = m.lam(x)
    R = m.residual(x)
    assert np.all(np.abs(Lam) <= 1)
    nz = np.abs(R) > 1e-12
    assert np.all(Lam[nz] == np.sign(R[nz]))
    assert m.in_sign_set(x, Lam)
    assert np.allclose(m.subgradient(x).vector, m.subgradient_from_lambda(x, Lam))


def test_mc_critical_values():
    mc = make_model("matrix-completion-ex1")
    for t in (-3.0, -0.5, 0.2, 1.0, 2.5):
        vals = [mc.value(mc_critical_point(f, t)) for f in ("C1", "C2", "C3")]
        assert np.allclose(vals, [0, 2, 2], atol=1e-12)
    assert mc.value(mc_critical_point("C4")) == 3.0


def test_sigmoid_identity():
    z = np.linspace(-30, 30, 2001)
    assert sigmoid(0.0) == 0.5
    assert np.max(np.abs(sigmoid(z) + sigmoid(-z) - 1)) <= 1e-15
    assert np.isfinite(sigmoid(np.array([-800.0, 800.0]))).all()


def test_hessian_examples():
    mc = make_model("matrix-completion-ex1")
    H = eval_hessian(mc, np.zeros(4))
    assert np.allclose(H, H.T)
    eigs = np.linalg.eigvalsh(H)
    # eigenvalues are +-2 phi and +-2/phi with phi the golden ratio
    phi = (1 + 5 ** 0.5) / 2
    assert np.allclose(np.sort(eigs), [-2 * phi, -2 / phi, 2 / phi, 2 * phi])
    assert np.allclose(fd_hessian(mc.gradient, np.zeros(4)), H, atol=1e-6)
    assert np.allclose(eval_hessian(make_model("quadratic", dim=3), [1, 2, 3]), np.eye(3))
    eigs1 = np.linalg.eigvalsh(eval_hessian(mc, [1, 1, 1, 1]))
    assert abs(eigs1[0]) <= 1e-8 and eigs1[-1] > 1
    # kernel along the C1 tangent direction d/dt (t, t, 1/t, 1/t) at t = 1
    d = np.array([1, 1, -1, -1.0])
    assert np.linalg.norm(eval_hessian(mc, [1, 1, 1, 1]) @ d) <= 1e-12


def test_fd_hessian_fallback_matches_analytic_sigmoid():
    m = make_model("sigmoid-two-data")
    x = np.array([0.3, -0.7])
    H = m.hessian(x)
    assert np.allclose(H, H.T)
    assert np.allclose(H, fd_gradient_jac(m.gradient, x), atol=1e-5)


def fd_gradient_jac(grad, x, h=1e-5):
    J = np.empty((x.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return J


def test_input_errors():
    mc = make_model("matrix-completion-ex1")
    with pytest.raises(ShapeError):
        mc.value([1, 2, 3])
    with pytest.raises(NonFiniteError):
        mc.value([1, np.nan, 0, 0])
    with pytest.raises(UnsupportedOperation):
        make_model("relu-toy").hessian([1.0, 1.0])
    with pytest.raises(ConfigError):
        make_model("no-such-model")
    with pytest.raises(ConfigError):
        make_model("quadratic", bogus=1)


def test_known_infimum_respected():
    rng = np.random.default_rng(0)
    for name in REGISTRY:
        m = make_model(name)
        if m.known_infimum is None:
            continue
        X = rng.uniform(-5, 5, (500, m.dim))
        if name == "cex-unbounded":
            X = np.abs(X) + 1e-3
        vals = m.value_batch(X)
        assert np.all(vals >= m.known_infimum - 1e-12), name


def test_batch_matches_pointwise():
    rng = np.random.default_rng(1)
    for name in REGISTRY:
        m = make_model(name)
        X = rng.uniform(-2, 2, (20, m.dim))
        if name == "cex-unbounded":
            X = np.abs(X) + 0.1
        assert np.allclose(m.value_batch(X), [m.value(x) for x in X])
        assert np.allclose(m.gradient_batch(X), [m.subgradient(x).vector for x in X])


def test_sensing_ensemble():
    ens = build_sensing_ensemble(0, 20, 3, 3, 1)
    assert ens.lower_bound_c is not None and ens.lower_bound_c > 0
    again = build_sensing_ensemble(0, 20, 3, 3, 1)
    assert np.array_equal(ens.A, again.A) and np.array_equal(ens.b, again.b)
    assert np.allclose(ens.b - ens.measure(ens.planted), 0)
    # independent sampling of the lower bound claim
    rng = np.random.default_rng(99)
    for _ in range(500):
        Mt = np.outer(rng.standard_normal(3), rng.standard_normal(3))
        assert ens.ratio(Mt) >= ens.certified_c - 1e-12
    A = np.zeros((1, 3, 3))
    A[0, 0, 0] = 1.0
    weak = ensemble_from_matrices(A, 1)
    assert weak.lower_bound_c is None
    E = np.zeros((3, 3))
    E[1, 1] = 1.0
    assert weak.ratio(E) == 0.0


def test_model_sensing_planted_zero():
    m = make_model("matrix-sensing")
    assert m.known_infimum == 0.0


# --- proximal maps ------------------------------------------------------------

def test_soft_threshold_prox():
    a = make_model("abs", dim=1)
    for xk, tau in [(0.5, 1.0), (2.0, 0.3), (-1.2, 0.5)]:
        expect = np.sign(xk) * max(abs(xk) - tau, 0.0)
        assert a.prox(np.array([xk]), tau)[0] == pytest.approx(expect, abs=1e-15)


def _box_qp_bruteforce(Q, q):
    """Enumerate every face of the box and solve the free subproblem there."""
    n = q.size
    best, best_val = None, np.inf
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        pattern = np.array(pattern)
        free = pattern == 0
        x = pattern.astype(float)
        if free.any():
            sol, *_ = np.linalg.lstsq(Q[np.ix_(free, free)],
                                      q[free] - Q[np.ix_(free, ~free)] @ x[~free], rcond=None)
            x[free] = sol
            if np.any(np.abs(x) > 1 + 1e-12):
                continue
        val = 0.5 * x @ Q @ x - q @ x
        if val < best_val:
            best, best_val = x, val
    return best, best_val


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 4), st.integers(0, 2))
def test_box_qp_matches_bruteforce(seed, n, deficiency):
    rng = np.random.default_rng(seed)
    k = max(n - deficiency, 1)
    B = rng.standard_normal((n, k))
    Q = B @ B.T
    q = 3 * rng.standard_normal(n)
    x, ok = solve_box_qp(Q, q)
    assert ok
    assert np.all(np.abs(x) <= 1 + 1e-12)
    _, ref = _box_qp_bruteforce(Q, q)
    val = 0.5 * x @ Q @ x - q @ x
    assert val <= ref + 1e-9 * (1 + abs(ref))


def test_l1_prox_optimality():
    m = make_model("l1-factorization", seed=1)
    rng = np.random.default_rng(5)
    tau = 0.05
    for _ in range(5):
        x0 = rng.standard_normal(m.dim)
        z, Lam = m.prox_with_multiplier(x0, tau)
        # stationarity with a common multiplier in the sign set
        resid = (z - x0) / tau + m.subgradient_from_lambda(z, Lam)
        assert np.linalg.norm(resid) <= 1e-9
        assert m.in_sign_set(z, Lam, tol=1e-9)
        # independent check: no nearby point has a smaller subproblem value
        F = lambda y: m.value(y) + np.sum((y - x0) ** 2) / (2 * tau)
        ref = minimize(F, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
        assert F(z) <= ref.fun + 1e-7
