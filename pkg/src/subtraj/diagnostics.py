"""Runtime checks of trajectory invariants: conserved quantities, frozen
blocks, sign stability, boundedness classification and epsilon-critical search.

All checkers are pure functions of an immutable :class:`TrajectoryRecord`
plus the model that produced it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EpsilonSearchError, NumericError, StructureError
from .flows import DIVERGENCE, DEFAULT_DIVERGENCE_GUARD, ProxSchedule, minimizing_movement
from .models.factor import FactorModel, L1Factorization, LinearNN, SigmoidChain

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

BOUNDED = "bounded"
DIVERGING = "diverging"

FLOW_TOL = 1e-5
PROX_TOL_FACTOR = 5.0
SLOPE_THRESHOLD = 0.01


@dataclass(frozen=True)
class DiagnosticReport:
    """Verdict of one check. ``pass`` implies ``max_drift <= tolerance_used``."""

    check_name: str
    verdict: str
    witness: Optional[dict]
    max_drift: float
    tolerance_used: float

    def to_dict(self):
        return {"check_name": self.check_name, "verdict": self.verdict,
                "witness": self.witness, "max_drift": self.max_drift,
                "tolerance_used": self.tolerance_used}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @property
    def passed(self):
        return self.verdict == PASS


def _witness(record, k, **extra):
    return {"t": float(record.times[k]), "index": int(k),
            "state": [float(v) for v in record.states[k]], **extra}


def _report(name, drifts, tol, record, inconclusive=False):
    drifts = np.asarray(drifts, dtype=float)
    k = int(np.argmax(drifts)) if drifts.size else 0
    worst = float(drifts[k]) if drifts.size else 0.0
    if inconclusive:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS if worst <= tol else FAIL
    wit = _witness(record, k) if (verdict == FAIL or worst > 0) else None
    return DiagnosticReport(name, verdict, wit, worst, float(tol))


# ---------------------------------------------------------------------------
# conserved quantities
# ---------------------------------------------------------------------------

def _two_factor(model):
    if not isinstance(model, FactorModel) or len(model.shapes) != 2 \
            or model.shapes[0][1] != model.shapes[1][1]:
        raise StructureError(f"{model.name}: balancedness needs an (X, Y) factor pair "
                             "with equal column counts")


def balancedness(model, x):
    """``X^T X - Y^T Y`` for a two-factor model."""
    X, Y = model.unflatten(x)
    return X.T @ X - Y.T @ Y


def _phi_drifts(model, record):
    phi0 = balancedness(model, record.states[0])
    return [float(np.linalg.norm(balancedness(model, s) - phi0)) for s in record.states]


def check_balancedness_sensing(record, model, tol=FLOW_TOL) -> DiagnosticReport:
    """Drift of ``X^T X - Y^T Y`` from its initial value along a flow.

    The quantity is conserved by the continuous flow only; records from
    fixed-step descent are reported inconclusive.
    """
    _two_factor(model)
    return _report("balancedness_sensing", _phi_drifts(model, record), tol, record,
                   inconclusive=record.method == "euler")


def check_balancedness_l1(record, model, tau=None, factor=PROX_TOL_FACTOR) -> DiagnosticReport:
    """Drift of ``X^T X - Y^T Y`` along a minimizing-movement run, tolerance ``factor * tau``."""
    _two_factor(model)
    tau = record.meta.get("tau") if tau is None else tau
    if tau is None:
        raise StructureError("tau unknown: pass it or use a minimizing_movement record")
    return _report("balancedness_l1", _phi_drifts(model, record), factor * tau, record)


def l1_norm_bound(model, x0):
    """``||X0^T X0 - Y0^T Y0||_F^2 + 2 m n (||X0 Y0^T - M||_1 + ||M||_1)^2``."""
    X0, Y0 = model.unflatten(x0)
    phi = np.linalg.norm(X0.T @ X0 - Y0.T @ Y0)
    l1 = np.abs(X0 @ Y0.T - model.M).sum() + np.abs(model.M).sum()
    return float(phi ** 2 + 2 * model.m * model.n * l1 ** 2)


def check_l1_norm_bound(record, model) -> DiagnosticReport:
    """``||X||_2^4 + ||Y||_2^4`` stays below :func:`l1_norm_bound` at every sample.

    ``max_drift`` is the largest excess over the bound (negative when the
    bound holds with room to spare).
    """
    if not isinstance(model, L1Factorization):
        raise StructureError(f"{model.name}: norm bound applies to l1 factorisation only")
    bound = l1_norm_bound(model, record.states[0])
    lhs = []
    for s in record.states:
        X, Y = model.unflatten(s)
        lhs.append(np.linalg.norm(X, 2) ** 4 + np.linalg.norm(Y, 2) ** 4)
    excess = np.asarray(lhs) - bound
    k = int(np.argmax(excess))
    verdict = PASS if excess[k] <= 0 else FAIL
    return DiagnosticReport("l1_norm_bound", verdict,
                            _witness(record, k, lhs=float(lhs[k]), bound=bound),
                            float(excess[k]), 0.0)


def check_frozen_block(record, model, tol=1e-6, rank_tol=None) -> DiagnosticReport:
    """Columns of ``W_1 U`` outside the data range stay at their initial values.

    ``U`` comes from one SVD ``X = U S V^T`` of the data; when ``X`` has full
    row rank the block is empty and the check passes vacuously.
    """
    if not isinstance(model, LinearNN):
        raise StructureError(f"{model.name}: frozen block applies to linear networks only")
    try:
        U, s, _ = np.linalg.svd(model.X)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD of the data failed (cond estimate "
                           f"{np.linalg.cond(model.X)!r})") from exc
    if rank_tol is None:
        rank_tol = max(model.X.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int(np.sum(s > rank_tol))
    if r == model.X.shape[0]:
        return DiagnosticReport("frozen_block", PASS, None, 0.0, float(tol))
    U2 = U[:, r:]
    W10 = model.unflatten(record.states[0])[0]
    B0 = W10 @ U2
    drifts = [float(np.linalg.norm(model.unflatten(st)[0] @ U2 - B0)) for st in record.states]
    return _report("frozen_block", drifts, tol, record)


# ---------------------------------------------------------------------------
# sigmoid chain sign stability
# ---------------------------------------------------------------------------

def _last_sign_change(v, floor):
    """Index of the last sample where ``v`` flips sign, ignoring |v| <= floor."""
    sgn = np.sign(v) * (np.abs(v) > floor)
    last, prev = -1, 0.0
    for k, s in enumerate(sgn):
        if s == 0:
            continue
        if prev != 0 and s != prev:
            last = k
        prev = s
    return last


def check_sign_stability(record, model, noise_floor=1e-8, slope_tol=1e-8) -> DiagnosticReport:
    """Each weight and its velocity keep a fixed sign after some time T, and
    ``w_{L-1} - w_L^2 / 2`` is monotone on [T, t_end].

    Velocities are the analytic ``-grad f`` at the recorded states; values
    with magnitude below ``noise_floor`` carry no sign, so a trajectory that
    has settled on a critical point to that tolerance counts as stopped. T is the last
    observed sign change plus one sample. The verdict is inconclusive when T
    falls in the final decile of the horizon. ``max_drift`` is the worst
    slope of ``w_{L-1} - w_L^2 / 2`` against the monotone direction dictated
    by the sign of ``w_L' w_L``.
    """
    if not isinstance(model, SigmoidChain):
        raise StructureError(f"{model.name}: sign stability applies to the sigmoid chain only")
    T = record.times
    W = record.states
    V = -np.array([model._subgradient(w)[0] for w in W])
    last = -1
    for i in range(model.dim):
        last = max(last, _last_sign_change(W[:, i], noise_floor),
                   _last_sign_change(V[:, i], noise_floor))
    k0 = min(last + 1, len(T) - 1) if last >= 0 else 0
    t_stab = float(T[k0])
    if last >= 0 and t_stab > 0.9 * T[-1]:
        return DiagnosticReport("sign_stability", INCONCLUSIVE,
                                _witness(record, k0, stabilization_time=t_stab),
                                math.inf, float(slope_tol))
    h = W[k0:, -2] - 0.5 * W[k0:, -1] ** 2
    prod = V[k0:, -1] * W[k0:, -1]
    lead = prod[np.abs(prod) > noise_floor]
    direction = -1.0 if (lead.size == 0 or lead[0] >= 0) else 1.0
    if h.size < 2:
        return DiagnosticReport("sign_stability", PASS, None, 0.0, float(slope_tol))
    slopes = np.diff(h) / np.diff(T[k0:])
    # positive entries violate the required monotone direction
    bad = -direction * slopes
    j = int(np.argmax(bad))
    worst = float(max(bad[j], 0.0))
    verdict = PASS if worst <= slope_tol else FAIL
    wit = _witness(record, k0 + j, stabilization_time=t_stab,
                   direction="decreasing" if direction < 0 else "increasing")
    return DiagnosticReport("sign_stability", verdict, wit, worst, float(slope_tol))


# ---------------------------------------------------------------------------
# boundedness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundednessVerdict:
    """Boundedness class of one sampled trajectory.

    ``tail_slope`` is the least-squares slope of ``log(1 + ||x||)`` against
    ``log(1 + t)`` over the last quartile of samples, i.e. the growth
    exponent of the norm.
    """

    cls: str
    sup_norm: float
    tail_slope: float

    def to_dict(self):
        return {"class": self.cls, "sup_norm": self.sup_norm, "tail_slope": self.tail_slope}


def tail_slope(record):
    n = len(record)
    if n < 4:
        return 0.0
    k = max(n - max(n // 4, 2), 0)
    t = np.log1p(record.times[k:])
    y = np.log1p(np.linalg.norm(record.states[k:], axis=1))
    tc = t - t.mean()
    den = float(tc @ tc)
    return 0.0 if den == 0 else float(tc @ (y - y.mean()) / den)


def classify_boundedness(record, slope_threshold=SLOPE_THRESHOLD, grad_tol=1e-6,
                         divergence_guard=DEFAULT_DIVERGENCE_GUARD) -> BoundednessVerdict:
    """Classify a trajectory as bounded, diverging or inconclusive.

    * diverging: the divergence guard tripped, or the tail slope exceeds
      ``slope_threshold`` while the norm is non-decreasing over the tail;
    * bounded: the tail slope is at most ``slope_threshold`` and the final
      subgradient norm is at most ``grad_tol``;
    * inconclusive otherwise.
    """
    norms = np.linalg.norm(record.states, axis=1)
    sup = float(norms.max())
    slope = tail_slope(record)
    if record.terminated_by == DIVERGENCE or sup >= divergence_guard:
        return BoundednessVerdict(DIVERGING, sup, slope)
    n = len(record)
    tail = norms[max(n - max(n // 4, 2), 0):]
    growing = bool(np.all(np.diff(tail) >= -1e-12 * (1 + tail[:-1])))
    if slope > slope_threshold and growing:
        return BoundednessVerdict(DIVERGING, sup, slope)
    if slope <= slope_threshold and record.grad_norms[-1] <= grad_tol:
        return BoundednessVerdict(BOUNDED, sup, slope)
    return BoundednessVerdict(INCONCLUSIVE, sup, slope)


# ---------------------------------------------------------------------------
# epsilon-critical search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonCriticalPoint:
    x: np.ndarray
    s: np.ndarray
    value: float
    time: float


def epsilon_critical_search(model, x0, epsilon, inf_f=None, schedule=None,
                            max_steps=200_000, chunk=500) -> EpsilonCriticalPoint:
    """Follow the minimizing-movement scheme until ``f(x) <= inf f + eps`` and
    the selected subgradient has norm ``<= eps``.

    ``inf_f`` defaults to the model's known infimum or certified lower bound.
    Raises :class:`EpsilonSearchError` carrying the best (value, norm) pair
    when ``max_steps`` prox steps are exhausted.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if inf_f is None:
        inf_f = model.known_infimum if model.known_infimum is not None else model.lower_bound
    if inf_f is None:
        raise StructureError(f"{model.name}: no known infimum or lower bound; pass inf_f")
    base = schedule or ProxSchedule()
    x = model.check_point(x0)
    t0, done = 0.0, 0
    best = (math.inf, math.inf)
    while done < max_steps:
        steps = min(chunk, max_steps - done)
        sched = ProxSchedule(tau=base.tau, inner_tol=base.inner_tol,
                             inner_max_iters=base.inner_max_iters, outer_steps=steps)
        rec = minimizing_movement(model, x, sched).record
        ok = (rec.values <= inf_f + epsilon) & (rec.grad_norms <= epsilon)
        if ok.any():
            k = int(np.argmax(ok))
            s = model.subgradient(rec.states[k]).vector
            return EpsilonCriticalPoint(x=rec.states[k].copy(), s=s,
                                        value=float(rec.values[k]), time=t0 + float(rec.times[k]))
        gap = rec.values - inf_f
        j = int(np.argmin(np.maximum(gap, rec.grad_norms)))
        if max(gap[j], rec.grad_norms[j]) < max(best[0] - inf_f, best[1]):
            best = (float(rec.values[j]), float(rec.grad_norms[j]))
        x = rec.states[-1]
        t0 += float(rec.times[-1])
        done += steps
        if base.tau is None:
            base = ProxSchedule(tau=rec.meta["tau"], inner_tol=base.inner_tol,
                                inner_max_iters=base.inner_max_iters)
    raise EpsilonSearchError(f"no epsilon-critical pair within {max_steps} prox steps",
                             best_value=best[0], best_grad_norm=best[1])
