"""Descent dynamics: fixed-step subgradient descent, adaptive gradient flow and
the proximal minimizing-movement scheme.

Every integrator returns an immutable :class:`TrajectoryRecord`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import EnergyBoundError, ProxSolveError, UnsupportedOperation
from .models.base import SMOOTH, LossModel

HORIZON = "horizon"
CRITICAL = "critical_tol"
DIVERGENCE = "divergence_guard"

DEFAULT_CRITICAL_TOL = 1e-8
DEFAULT_DIVERGENCE_GUARD = 1e6

TRAJECTORY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrajectoryRecord:
    """Time-stamped states with objective values, step and subgradient norms.

    ``step_norms[k] = ||x_k - x_{k-1}||`` with ``step_norms[0] = 0``.
    """

    times: np.ndarray
    states: np.ndarray
    values: np.ndarray
    step_norms: np.ndarray
    grad_norms: np.ndarray
    terminated_by: str
    method: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "states", "values", "step_norms", "grad_norms"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.times)
        if not (len(self.states) == len(self.values) == len(self.step_norms)
                == len(self.grad_norms) == n):
            raise ValueError("trajectory sequences must have equal length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def final_value(self):
        return float(self.values[-1])

    @property
    def t_end(self):
        return float(self.times[-1])

    def to_csv(self, fh=None):
        """Write ``t,x_0..x_{d-1},f,grad_norm,step_norm`` rows."""
        own = fh is None
        fh = io.StringIO() if own else fh
        d = self.states.shape[1]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *[f"x_{i}" for i in range(d)], "f", "grad_norm", "step_norm"])
        for k in range(len(self)):
            w.writerow([repr(float(self.times[k])), *[repr(float(v)) for v in self.states[k]],
                        repr(float(self.values[k])), repr(float(self.grad_norms[k])),
                        repr(float(self.step_norms[k]))])
        return fh.getvalue() if own else None

    def save_npz(self, path):
        np.savez(path, format_version=TRAJECTORY_FORMAT_VERSION, times=self.times,
                 states=self.states, values=self.values, step_norms=self.step_norms,
                 grad_norms=self.grad_norms, terminated_by=self.terminated_by,
                 method=self.method)


def read_trajectory_csv(fh) -> TrajectoryRecord:
    text = fh.read() if hasattr(fh, "read") else str(fh)
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    d = len(header) - 4
    return TrajectoryRecord(times=body[:, 0], states=body[:, 1:1 + d], values=body[:, 1 + d],
                            grad_norms=body[:, 2 + d], step_norms=body[:, 3 + d],
                            terminated_by="unknown", method="csv")


def load_npz(path) -> TrajectoryRecord:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != TRAJECTORY_FORMAT_VERSION:
            raise ValueError(f"unsupported trajectory format version {version}")
        return TrajectoryRecord(times=z["times"], states=z["states"], values=z["values"],
                                step_norms=z["step_norms"], grad_norms=z["grad_norms"],
                                terminated_by=str(z["terminated_by"]), method=str(z["method"]))


def _step_norms(states):
    out = np.zeros(len(states))
    if len(states) > 1:
        out[1:] = np.linalg.norm(np.diff(states, axis=0), axis=1)
    return out


# ---------------------------------------------------------------------------
# fixed-step subgradient descent
# ---------------------------------------------------------------------------

@dataclass
class EulerBatch:
    """Outcome of :func:`euler_descent_batch` for B independent starts."""

    final_states: np.ndarray
    final_values: np.ndarray
    final_grad_norms: np.ndarray
    iterations: np.ndarray
    terminated_by: list
    plateau_iters: np.ndarray
    sample_iters: np.ndarray
    sample_states: np.ndarray  # (n_samples, B, d); frozen rows repeat their last state


def euler_descent_batch(model: LossModel, X0, step, max_iters,
                        critical_tol=DEFAULT_CRITICAL_TOL,
                        divergence_guard=DEFAULT_DIVERGENCE_GUARD,
                        record_every=1, plateau_grad_tol=None):
    """Run ``x <- x - step * g(x)`` on every row of ``X0`` in lock-step.

    A row stops once its selected subgradient has norm <= ``critical_tol``,
    its norm reaches ``divergence_guard``, or a non-finite value appears (the
    last finite state is kept). Rows never interact, so the result for a row
    does not depend on the batch it was run in.

    ``plateau_iters`` counts the trailing iterations whose subgradient norm
    stayed below ``plateau_grad_tol``.
    """
    if step <= 0 or max_iters < 1:
        raise ValueError("step must be > 0 and max_iters >= 1")
    Z = np.array(X0, dtype=float).reshape(-1, model.dim)
    B = Z.shape[0]
    active = np.ones(B, dtype=bool)
    reason = np.full(B, HORIZON, dtype=object)
    iters = np.zeros(B, dtype=np.int64)
    plateau = np.zeros(B, dtype=np.int64)
    samples_it, samples = [0], [Z.copy()]
    G = model.gradient_batch(Z)
    gn = np.sqrt(np.sum(G * G, axis=1))
    for k in range(int(max_iters)):
        nrm = np.sqrt(np.sum(Z * Z, axis=1))
        stop_crit = active & (gn <= critical_tol)
        stop_div = active & ~stop_crit & (nrm >= divergence_guard)
        reason[stop_crit] = CRITICAL
        reason[stop_div] = DIVERGENCE
        active &= ~(stop_crit | stop_div)
        if not active.any():
            break
        if plateau_grad_tol is not None:
            plateau = np.where(active, np.where(gn < plateau_grad_tol, plateau + 1, 0), plateau)
        Znew = Z - step * G
        Gnew = model.gradient_batch(Znew)
        bad = active & ~(np.all(np.isfinite(Znew), axis=1) & np.all(np.isfinite(Gnew), axis=1))
        reason[bad] = DIVERGENCE
        active &= ~bad
        Z = np.where(active[:, None], Znew, Z)
        G = np.where(active[:, None], Gnew, G)
        gn = np.where(active, np.sqrt(np.sum(G * G, axis=1)), gn)
        iters += active
        if (k + 1) % record_every == 0:
            samples_it.append(k + 1)
            samples.append(Z.copy())
    last = int(iters.max(initial=0))
    if samples_it[-1] < last:
        samples_it.append(last)
        samples.append(Z.copy())
    return EulerBatch(final_states=Z, final_values=model.value_batch(Z), final_grad_norms=gn,
                      iterations=iters, terminated_by=list(reason), plateau_iters=plateau,
                      sample_iters=np.array(samples_it), sample_states=np.array(samples))


def euler_descent(model: LossModel, x0, step, max_iters,
                  critical_tol=DEFAULT_CRITICAL_TOL,
                  divergence_guard=DEFAULT_DIVERGENCE_GUARD,
                  record_every=1) -> TrajectoryRecord:
    """Fixed-step subgradient descent from a single start.

    Times are flow times ``k * step``.
    """
    x0 = model.check_point(x0)
    out = euler_descent_batch(model, x0[None], step, max_iters, critical_tol,
                              divergence_guard, record_every)
    n_done = int(out.iterations[0])
    keep = out.sample_iters <= n_done
    its = out.sample_iters[keep]
    # drop duplicated samples after the row froze
    its, idx = np.unique(its, return_index=True)
    states = out.sample_states[keep][idx, 0, :]
    values = model.value_batch(states)
    grads = model.gradient_batch(states)
    return TrajectoryRecord(times=its * step, states=states, values=values,
                            step_norms=_step_norms(states),
                            grad_norms=np.linalg.norm(grads, axis=1),
                            terminated_by=out.terminated_by[0], method="euler",
                            meta={"step": step, "iterations": n_done,
                                  "record_every": record_every})


# ---------------------------------------------------------------------------
# adaptive gradient flow
# ---------------------------------------------------------------------------

def gradient_flow(model: LossModel, x0, t_end, rel_tol=1e-9, abs_tol=None, t_eval=None,
                  n_samples=201, method="DOP853",
                  divergence_guard=DEFAULT_DIVERGENCE_GUARD) -> TrajectoryRecord:
    """Integrate ``x' = -grad f(x)`` with an embedded Runge-Kutta pair.

    States are reported at ``t_eval`` (default: ``n_samples`` equispaced
    times on [0, t_end]) through the integrator's dense output. Crossing
    ``divergence_guard`` in norm, or a step-size collapse, ends the run with
    ``terminated_by = "divergence_guard"`` at the last valid state.
    """
    if model.smoothness != SMOOTH:
        raise UnsupportedOperation(f"{model.name} is not smooth; use minimizing_movement")
    if t_end <= 0 or rel_tol <= 0:
        raise ValueError("t_end and rel_tol must be positive")
    x0 = model.check_point(x0)
    abs_tol = rel_tol * 1e-3 if abs_tol is None else abs_tol
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, int(n_samples))
    t_eval = np.asarray(t_eval, dtype=float)

    def rhs(t, x):
        return -model._subgradient(x)[0]

    def guard(t, x):
        return divergence_guard - np.linalg.norm(x)

    guard.terminal = True
    guard.direction = -1
    with np.errstate(all="ignore"):
        sol = solve_ivp(rhs, (0.0, float(t_end)), x0, method=method, t_eval=t_eval,
                        rtol=rel_tol, atol=abs_tol, events=guard)
    times, states = sol.t, sol.y.T
    reason = HORIZON
    if sol.status == 1:
        reason = DIVERGENCE
    elif sol.status == -1:
        reason = DIVERGENCE
    if reason == DIVERGENCE:
        # append the last valid state reached by the integrator
        t_last = sol.t_events[0][0] if sol.status == 1 else None
        x_last = sol.y_events[0][0] if sol.status == 1 else None
        if t_last is not None and (len(times) == 0 or t_last > times[-1]):
            times = np.append(times, t_last)
            states = np.vstack([states, x_last]) if len(states) else x_last[None]
        finite = np.all(np.isfinite(states), axis=1)
        times, states = times[finite], states[finite]
    grads = np.array([model._subgradient(s)[0] for s in states])
    values = np.array([model._value(s) for s in states])
    return TrajectoryRecord(times=times, states=states, values=values,
                            step_norms=_step_norms(states),
                            grad_norms=np.linalg.norm(grads, axis=1), terminated_by=reason,
                            method="flow", meta={"rel_tol": rel_tol, "abs_tol": abs_tol,
                                                 "integrator": method, "nfev": int(sol.nfev),
                                                 "message": sol.message})


# ---------------------------------------------------------------------------
# proximal minimizing movement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProxSchedule:
    """Parameters of the minimizing-movement recursion.

    ``tau=None`` picks ``0.1 (1 + ||x0||) / (1 + ||g(x0)||)`` at run time.
    """

    tau: Optional[float] = None
    inner_tol: float = 1e-10
    inner_max_iters: int = 10_000
    outer_steps: int = 100

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        if self.outer_steps < 1 or self.inner_max_iters < 1:
            raise ValueError("outer_steps and inner_max_iters must be >= 1")


def default_tau(model, x0):
    g = model.subgradient(x0).norm
    return 0.1 * (1.0 + float(np.linalg.norm(x0))) / (1.0 + g)


def _inner_descent(model, xk, tau, inner_tol, inner_max_iters):
    """Armijo descent on ``F(x) = f(x) + ||x - xk||^2 / (2 tau)`` from ``xk``."""
    def F(x):
        d = x - xk
        return model._value(x) + float(d @ d) / (2 * tau)

    def dF(x):
        return model._subgradient(x)[0] + (x - xk) / tau

    x = xk.copy()
    Fx, g = F(x), dF(x)
    s = tau
    smooth = model.smoothness == SMOOTH
    for _ in range(int(inner_max_iters)):
        gn = float(np.linalg.norm(g))
        if gn <= inner_tol:
            return x, gn
        floor = 8 * np.finfo(float).eps * (1 + abs(Fx))
        while True:
            trial = x - s * g
            Ft = F(trial)
            if 0.5 * s * gn * gn > floor:
                if Ft <= Fx - 0.5 * s * gn * gn:
                    break
            # below the rounding level of F the Armijo test is blind: accept
            # steps that do not raise F and shrink the gradient instead
            elif Ft <= Fx + floor and np.linalg.norm(dF(trial)) < gn:
                break
            s *= 0.5
            if s < 1e-300:
                break
        if s < 1e-300 or not np.isfinite(Ft):
            if not smooth:
                # stalled at a kink; descent holds since F never increased
                return x, gn
            raise ProxSolveError("inner line search collapsed", best=x, residual=gn)
        x, Fx, g = trial, Ft, dF(trial)
        s *= 2.0
    gn = float(np.linalg.norm(g))
    if gn <= inner_tol:
        return x, gn
    raise ProxSolveError(f"inner solver exhausted {inner_max_iters} iterations "
                         f"(residual {gn:.3e})", best=x, residual=gn)


def prox_step(model: LossModel, xk, tau, inner_tol=1e-10, inner_max_iters=10_000):
    """Approximate ``argmin f(x) + ||x - xk||^2 / (2 tau)``.

    Uses the model's exact proximal map when it has one, otherwise Armijo
    descent on the subproblem down to gradient norm ``inner_tol``. The result
    always satisfies ``f(x) + ||x - xk||^2/(2 tau) <= f(xk) + inner_tol ||x - xk||``
    up to the rounding error of f reported by ``model.value_error``; a
    violation raises :class:`ProxSolveError`.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    xk = model.check_point(xk)
    if model.has_prox:
        x = np.asarray(model.prox(xk, tau), dtype=float)
        resid = 0.0
    else:
        x, resid = _inner_descent(model, xk, tau, inner_tol, inner_max_iters)
    d = float(np.linalg.norm(x - xk))
    lhs = model._value(x) + d * d / (2 * tau)
    rhs = model._value(xk) + inner_tol * d
    slack = 4 * np.finfo(float).eps * max(1.0, abs(rhs)) \
        + model.value_error(x) + model.value_error(xk)
    if lhs > rhs + slack:
        raise ProxSolveError(f"descent certificate failed: {lhs!r} > {rhs!r}",
                             best=x, residual=resid)
    return x


@dataclass(frozen=True)
class MovementResult:
    """Minimizing-movement output: knots ``x_k`` at times ``k tau``.

    ``velocities[k] = (x_{k+1} - x_k)/tau`` is the slope of the affine
    interpolant on ``(k tau, (k+1) tau]``; ``-velocities[k]`` is a subgradient
    at ``x_{k+1}`` when the proximal subproblem was solved exactly.
    """

    record: TrajectoryRecord
    tau: float
    velocities: np.ndarray
    energy: float
    energy_bound: Optional[float]

    @property
    def knots(self):
        return self.record.states

    def interpolant(self, t):
        """Piecewise-affine curve through the knots."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        T = self.record.times
        X = self.record.states
        out = np.empty((t.size, X.shape[1]))
        for j in range(X.shape[1]):
            out[:, j] = np.interp(t, T, X[:, j])
        return out

    def piecewise_constant(self, t):
        """Equals ``x_{k+1}`` on ``(k tau, (k+1) tau]`` and ``x_0`` at 0."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.clip(np.ceil(t / self.tau - 1e-12).astype(int), 0, len(self.record) - 1)
        return self.record.states[k]


def minimizing_movement(model: LossModel, x0, schedule: ProxSchedule,
                        energy_tol=1e-9) -> MovementResult:
    """Iterate the proximal map ``schedule.outer_steps`` times from ``x0``.

    Records the energy ``sum ||x_{k+1} - x_k||^2 / (2 tau)`` and raises
    :class:`EnergyBoundError` if it exceeds ``f(x0) - inf f`` (when the
    infimum or a certified lower bound is known) by more than the inner
    tolerance slack.
    """
    x0 = model.check_point(x0)
    tau = schedule.tau if schedule.tau is not None else default_tau(model, x0)
    states = [x0]
    slack = 0.0
    for _ in range(schedule.outer_steps):
        x = prox_step(model, states[-1], tau, schedule.inner_tol, schedule.inner_max_iters)
        slack += schedule.inner_tol * float(np.linalg.norm(x - states[-1]))
        states.append(x)
    S = np.array(states)
    vel = np.diff(S, axis=0) / tau
    steps = _step_norms(S)
    energy = float(np.sum(steps ** 2) / (2 * tau))
    values = np.array([model._value(s) for s in S])
    grads = np.array([model._subgradient(s)[0] for s in S])
    lb = model.lower_bound
    bound = None if lb is None else float(values[0] - lb)
    if bound is not None and energy > bound + slack + energy_tol * (1 + abs(bound)):
        raise EnergyBoundError(f"movement energy {energy!r} exceeds f(x0) - inf f = {bound!r}")
    rec = TrajectoryRecord(times=np.arange(len(S)) * tau, states=S, values=values,
                           step_norms=steps, grad_norms=np.linalg.norm(grads, axis=1),
                           terminated_by=HORIZON, method="prox",
                           meta={"tau": tau, "inner_tol": schedule.inner_tol,
                                 "energy": energy})
    return MovementResult(record=rec, tau=tau, velocities=vel, energy=energy,
                          energy_bound=bound)


@dataclass(frozen=True)
class HolderReport:
    max_ratio: float
    bound: float
    violated: bool
    pair: tuple


def holder_estimate(result: MovementResult, C, n_random=1000, seed=0) -> HolderReport:
    """Largest ``||x~(t) - x~(s)|| / |t - s|^(1/2)`` over all knot pairs and
    ``n_random`` random pairs; flags a violation of ``sqrt(2 C)``."""
    T = result.record.times
    X = result.record.states
    best, pair = 0.0, (0.0, 0.0)
    for i in range(len(T) - 1):
        dist = np.linalg.norm(X[i + 1:] - X[i], axis=1)
        ratio = dist / np.sqrt(T[i + 1:] - T[i])
        j = int(np.argmax(ratio))
        if ratio[j] > best:
            best, pair = float(ratio[j]), (float(T[i]), float(T[i + 1 + j]))
    if n_random and len(T) > 1:
        rng = np.random.default_rng(seed)
        st = rng.uniform(T[0], T[-1], size=(n_random, 2))
        st = st[st[:, 0] != st[:, 1]]
        a = result.interpolant(st[:, 0])
        b = result.interpolant(st[:, 1])
        ratio = np.linalg.norm(a - b, axis=1) / np.sqrt(np.abs(st[:, 0] - st[:, 1]))
        j = int(np.argmax(ratio))
        if ratio[j] > best:
            best, pair = float(ratio[j]), (float(st[j, 0]), float(st[j, 1]))
    bound = math.sqrt(2.0 * max(float(C), 0.0))
    return HolderReport(max_ratio=best, bound=bound, violated=best > bound * (1 + 1e-9),
                        pair=pair)
