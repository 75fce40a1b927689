import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from subtraj.errors import ProxSolveError, UnsupportedOperation, EnergyBoundError
from subtraj.flows import (CRITICAL, DIVERGENCE, HORIZON, ProxSchedule, TrajectoryRecord,
                           euler_descent, euler_descent_batch, gradient_flow, holder_estimate,
                           load_npz, minimizing_movement, prox_step, read_trajectory_csv)
from subtraj.models import make_model
from subtraj.models.base import LossModel


def test_euler_linear_recursion():
    q = make_model("quadratic", dim=2)
    rec = euler_descent(q, [1.0, 1.0], 0.01, 5)
    assert np.allclose(rec.states[1], [0.99, 0.99])
    assert np.allclose(rec.states[:, 0], 0.99 ** np.arange(6))
    assert rec.terminated_by == HORIZON
    assert np.allclose(rec.times, 0.01 * np.arange(6))
    assert rec.step_norms[0] == 0


def test_euler_stationary_at_critical_point():
    mc = make_model("matrix-completion-ex1")
    rec = euler_descent(mc, [1, 1, 1, 1], 0.01, 100)
    assert rec.terminated_by == CRITICAL
    assert np.all(rec.states == 1.0)


def test_euler_divergence_guard_and_nonfinite():
    class Explode(LossModel):
        name = "explode"

        def __init__(self):
            super().__init__(1)

        def _value(self, x):
            return float(-np.exp(x[0]))

        def _subgradient(self, x):
            with np.errstate(over="ignore"):
                return np.array([-np.exp(x[0])]), True

    rec = euler_descent(Explode(), [1.0], 1.0, 100)
    assert rec.terminated_by == DIVERGENCE
    assert np.all(np.isfinite(rec.states))
    lin = make_model("quadratic", dim=1)
    rec = euler_descent(lin, [1.0], 3.0, 1000, divergence_guard=1e3)
    assert rec.terminated_by == DIVERGENCE and abs(rec.states[-1, 0]) >= 1e3


def test_euler_batch_rows_independent():
    mc = make_model("matrix-completion-ex1")
    rng = np.random.default_rng(0)
    X0 = rng.uniform(-1, 1, (7, 4))
    full = euler_descent_batch(mc, X0, 0.01, 2000, record_every=50)
    for i in range(7):
        one = euler_descent_batch(mc, X0[i:i + 1], 0.01, 2000, record_every=50)
        assert np.array_equal(one.final_states[0], full.final_states[i])


def test_euler_descent_when_step_small():
    # values non-increasing when Lipschitz estimate * step <= 1
    q = make_model("quadratic", dim=3)
    rec = euler_descent(q, [3.0, -2.0, 1.0], 0.5, 200)
    assert np.all(np.diff(rec.values) <= 0)


def test_gradient_flow_closed_form():
    q = make_model("quadratic", dim=1)
    rec = gradient_flow(q, [1.0], 1.0, rel_tol=1e-10)
    assert abs(rec.states[-1, 0] - np.exp(-1)) <= 1e-6
    c = make_model("constant", dim=3, c=0.0)
    rec = gradient_flow(c, [1.0, 2.0, 3.0], 5.0)
    assert np.all(rec.states == [1.0, 2.0, 3.0])


def test_gradient_flow_rejects_nonsmooth():
    with pytest.raises(UnsupportedOperation):
        gradient_flow(make_model("relu-toy"), [1.0, 1.0], 1.0)


def test_gradient_flow_blowup_guard():
    class Blow(LossModel):
        name = "blow"

        def __init__(self):
            super().__init__(1)

        def _value(self, x):
            return float(-x[0] ** 4)

        def _subgradient(self, x):
            return np.array([-4 * x[0] ** 3]), True

    rec = gradient_flow(Blow(), [1.0], 10.0, divergence_guard=1e6)
    assert rec.terminated_by == DIVERGENCE
    assert np.all(np.isfinite(rec.states))


def test_cex_separation_identity():
    cx = make_model("cex-unbounded")
    rec = gradient_flow(cx, [2.0], 50.0, rel_tol=1e-10, n_samples=501)
    g = cx.separation_potential
    drift = g(rec.states[:, 0]) - 2 * rec.times - g(2.0)
    assert np.max(np.abs(drift)) <= 1e-4
    assert np.all(np.diff(rec.states[:, 0]) > 0)


@pytest.mark.parametrize("name,x0", [("matrix-completion-ex1", [0.5, -0.3, 0.8, 0.1]),
                                     ("sigmoid-chain", [0.5, -1.0, 1.5]),
                                     ("sigmoid-two-data", [1.0, 0.2]),
                                     ("linear-nn", None), ("matrix-sensing", None),
                                     ("cex-infinite-critical", [0.7])])
def test_flow_monotone_and_deferred_value(name, x0):
    m = make_model(name)
    if x0 is None:
        x0 = np.random.default_rng(0).standard_normal(m.dim)
    rec = gradient_flow(m, x0, 5.0, rel_tol=1e-10, n_samples=2001)
    slack = 10 * 1e-10 * (1 + np.abs(rec.values[:-1]))
    assert np.all(np.diff(rec.values) <= slack)
    # f(x(0)) - f(x(T)) = int ||grad f||^2 dt
    integral = simpson(rec.grad_norms ** 2, x=rec.times)
    drop = rec.values[0] - rec.values[-1]
    assert abs(drop - integral) <= 1e-3 * (1 + drop)


def test_prox_examples():
    q = make_model("quadratic", dim=1)
    assert prox_step(q, [2.0], 1.0)[0] == pytest.approx(1.0, abs=1e-14)
    a = make_model("abs", dim=1)
    assert prox_step(a, [0.5], 1.0)[0] == 0.0
    assert prox_step(a, [2.0], 0.3)[0] == pytest.approx(1.7, abs=1e-14)


def test_prox_inner_solver_against_closed_form():
    class Quad(LossModel):
        # quadratic without a registered prox, to exercise the inner solver
        name = "quad-noprox"

        def __init__(self):
            super().__init__(2)

        def _value(self, x):
            return 0.5 * float(x @ x)

        def _subgradient(self, x):
            return x.copy(), True

    x = prox_step(Quad(), [2.0, -1.0], 0.7, inner_tol=1e-12)
    assert np.allclose(x, np.array([2.0, -1.0]) / 1.7, atol=1e-11)


def test_prox_error_carries_best():
    mc = make_model("matrix-completion-ex1")
    with pytest.raises(ProxSolveError) as err:
        prox_step(mc, [0.5, 0.5, 0.5, 0.5], 0.5, inner_tol=1e-14, inner_max_iters=2)
    assert err.value.best is not None and np.isfinite(err.value.residual)


def test_minimizing_movement_quadratic_closed_form():
    q = make_model("quadratic", dim=1)
    res = minimizing_movement(q, [1.0], ProxSchedule(tau=0.5, outer_steps=10))
    assert np.max(np.abs(res.knots[:, 0] - (2 / 3) ** np.arange(11))) <= 1e-12
    assert res.energy <= 0.5
    rep = holder_estimate(res, 0.5)
    assert not rep.violated and rep.max_ratio <= rep.bound
    assert np.allclose(res.velocities[:, 0], np.diff(res.knots[:, 0]) / 0.5)
    # interpolants
    assert np.allclose(res.interpolant([0.25])[0, 0], (1 + 2 / 3) / 2)
    assert np.allclose(res.piecewise_constant([0.25])[0, 0], 2 / 3)


def test_holder_two_point_and_constant():
    c = make_model("constant", dim=1, c=1.0)
    res = minimizing_movement(c, [0.3], ProxSchedule(tau=0.1, outer_steps=5))
    assert holder_estimate(res, 0.0).max_ratio == 0.0
    q = make_model("quadratic", dim=1)
    res = minimizing_movement(q, [1.0], ProxSchedule(tau=0.5, outer_steps=1))
    L = abs(res.knots[1, 0] - res.knots[0, 0])
    rep = holder_estimate(res, 0.5, n_random=0)
    assert rep.max_ratio == pytest.approx(L / np.sqrt(0.5), rel=1e-12)


def test_scheme_consistency():
    q = make_model("quadratic", dim=1)
    errs = []
    for tau in (0.1, 0.05, 0.025):
        n = int(round(1 / tau))
        res = minimizing_movement(q, [1.0], ProxSchedule(tau=tau, outer_steps=n))
        t = np.linspace(0, 1, 201)
        errs.append(np.max(np.abs(res.interpolant(t)[:, 0] - np.exp(-t))))
    assert errs[0] > errs[1] > errs[2]
    assert max(e / tau for e, tau in zip(errs, (0.1, 0.05, 0.025))) <= 1.0


def test_energy_bound_error_raised():
    class Liar(LossModel):
        # claims an infimum that is too high, so the energy bound must fail
        name = "liar"

        def __init__(self):
            super().__init__(1, known_infimum=0.4)

        def _value(self, x):
            return 0.5 * float(x @ x)

        def _subgradient(self, x):
            return x.copy(), True

    with pytest.raises(EnergyBoundError):
        minimizing_movement(Liar(), [1.0], ProxSchedule(tau=0.5, outer_steps=20))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.02, 0.05, 0.1]))
def test_descent_and_energy_properties(seed, tau):
    mc = make_model("matrix-completion-ex1")
    x0 = np.random.default_rng(seed).uniform(-1, 1, 4)
    sched = ProxSchedule(tau=tau, inner_tol=1e-10, outer_steps=40)
    res = minimizing_movement(mc, x0, sched)
    S, f = res.knots, res.record.values
    for k in range(len(S) - 1):
        d = np.linalg.norm(S[k + 1] - S[k])
        assert f[k + 1] + d * d / (2 * tau) <= f[k] + sched.inner_tol * d + 1e-14
    assert res.energy <= f[0] - 0.0 + 1e-9
    assert not holder_estimate(res, f[0]).violated


def test_record_csv_and_npz_roundtrip(tmp_path):
    mc = make_model("matrix-completion-ex1")
    rec = euler_descent(mc, [0.1, 0.2, 0.3, 0.4], 0.01, 50, record_every=10)
    text = rec.to_csv()
    assert text.splitlines()[0] == "t,x_0,x_1,x_2,x_3,f,grad_norm,step_norm"
    back = read_trajectory_csv(io.StringIO(text))
    assert np.array_equal(back.states, rec.states) and np.array_equal(back.values, rec.values)
    rec.save_npz(tmp_path / "r.npz")
    again = load_npz(tmp_path / "r.npz")
    assert np.array_equal(again.states, rec.states)
    assert again.terminated_by == rec.terminated_by


def test_record_validation():
    with pytest.raises(ValueError):
        TrajectoryRecord([0, 0], [[0], [1]], [0, 0], [0, 0], [0, 0], HORIZON)
    rec = TrajectoryRecord([0, 1], [[0], [1]], [0, 0], [0, 1], [0, 0], HORIZON)
    with pytest.raises(ValueError):
        rec.states[0, 0] = 5.0


def test_schedule_validation():
    with pytest.raises(ValueError):
        ProxSchedule(tau=0.0)
    with pytest.raises(ValueError):
        ProxSchedule(inner_tol=-1.0)
