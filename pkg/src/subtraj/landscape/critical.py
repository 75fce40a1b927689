"""Critical points: the closed-form family of the 2x2 completion example,
Newton polishing for general smooth models, Hessian classification."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, UnsupportedOperation
from ..models.base import SMOOTH
from ..models.zoo import MatrixCompletionEx1

MINIMUM = "minimum"
STRICT_SADDLE = "strict_saddle"
MAXIMUM = "maximum"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CriticalRecord:
    point: np.ndarray
    value: float
    grad_norm: float
    eig_min: float
    eig_max: float
    classification: str
    family: str = ""
    note: str = ""

    def to_dict(self):
        return {"point": [float(v) for v in self.point], "value": self.value,
                "grad_norm": self.grad_norm, "eig_min": self.eig_min, "eig_max": self.eig_max,
                "classification": self.classification, "family": self.family, "note": self.note}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def eig_tolerance(eigs):
    return 1e-8 * (1.0 + float(np.max(np.abs(eigs))))


def classify_hessian(H):
    """Return (eig_min, eig_max, classification) of a symmetric matrix.

    Signs are decided with tolerance ``1e-8 (1 + max |eig|)``; a Hessian
    with every eigenvalue inside the tolerance is degenerate, never a
    minimum.
    """
    eigs = np.linalg.eigvalsh(0.5 * (H + H.T))
    lo, hi = float(eigs[0]), float(eigs[-1])
    tol = eig_tolerance(eigs)
    if lo < -tol and hi > tol:
        cls = STRICT_SADDLE
    elif abs(lo) <= tol and abs(hi) <= tol:
        cls = DEGENERATE
    elif lo >= -tol:
        cls = MINIMUM
    else:
        cls = MAXIMUM
    return lo, hi, cls


def _record(model, x, family="", note=""):
    lo, hi, cls = classify_hessian(model.hessian(x))
    return CriticalRecord(point=np.array(x, dtype=float), value=float(model.value(x)),
                          grad_norm=model.subgradient(x).norm, eig_min=lo, eig_max=hi,
                          classification=cls, family=family, note=note)


def mc_critical_point(family, t=None):
    """Point of the critical family C1..C4 at parameter ``t``."""
    if family == "C4":
        return np.zeros(4)
    if t is None or t == 0 or not np.isfinite(t):
        raise DomainError(f"{family} needs a finite nonzero parameter, got {t!r}")
    t = float(t)
    if family == "C1":
        return np.array([t, t, 1 / t, 1 / t])
    if family == "C2":
        return np.array([t, 0.0, 1 / t, -1 / t])
    if family == "C3":
        return np.array([t, -t, 0.0, -1 / t])
    raise DomainError(f"unknown family {family!r}")


def enumerate_critical_mc(param_samples, include_origin=True):
    """Records at C1, C2, C3 for every parameter, then the origin C4 once."""
    model = MatrixCompletionEx1()
    out = []
    for t in param_samples:
        for fam in ("C1", "C2", "C3"):
            out.append(_record(model, mc_critical_point(fam, t), family=f"{fam}(t={t:g})"))
    if include_origin:
        out.append(_record(model, mc_critical_point("C4"), family="C4"))
    return out


@dataclass
class CriticalSearch:
    """Deduplicated critical points, per-seed failures and clustered values."""

    records: list
    failures: list = field(default_factory=list)
    values: list = field(default_factory=list)


def cluster_values(values, tol=1e-6):
    """Sorted representatives of groups of values closer than ``tol``."""
    reps = []
    for v in sorted(values):
        if not reps or v - reps[-1][-1] > tol:
            reps.append([v])
        else:
            reps[-1].append(v)
    return [float(np.mean(g)) for g in reps]


def _polish(model, x, grad_tol, max_iter):
    note = "newton"
    g = model.subgradient(x).vector
    gn = float(np.linalg.norm(g))
    for _ in range(max_iter):
        if gn <= grad_tol:
            return x, gn, note
        H = model.hessian(x)
        try:
            if np.linalg.cond(H) > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned")
            d = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(H, g, rcond=1e-12)[0]
            note = "newton-lstsq"
        step, moved = 1.0, False
        while step > 1e-10:
            xt = x + step * d
            gt = model.subgradient(xt).vector
            if np.linalg.norm(gt) < gn:
                moved = True
                break
            step *= 0.5
        if not moved:
            # gradient step on 0.5 ||grad f||^2
            note = "gradient-fallback"
            d = -H @ g
            step = 1.0 / (1.0 + float(np.linalg.norm(H)) ** 2)
            while step > 1e-16:
                xt = x + step * d
                gt = model.subgradient(xt).vector
                if np.linalg.norm(gt) < gn:
                    moved = True
                    break
                step *= 0.5
            if not moved:
                return x, gn, note
        x, g, gn = xt, gt, float(np.linalg.norm(gt))
    return x, gn, note


def newton_correction(model, x):
    """Length of the least-squares Newton correction at ``x``."""
    g = model.subgradient(x).vector
    d = np.linalg.lstsq(model.hessian(x), g, rcond=1e-12)[0]
    return float(np.linalg.norm(d))


def find_critical_numeric(model, seeds, grad_tol=1e-10, max_iter=100, dedupe_tol=1e-6,
                          value_tol=1e-6, step_tol=1e-6) -> CriticalSearch:
    """Polish each seed by damped Newton on the gradient.

    Ill-conditioned Newton systems use a least-squares step; when no Newton
    step reduces the gradient norm, a gradient step on ``||grad f||^2 / 2``
    is taken instead. The last method used is kept in ``note``. Points
    closer than ``dedupe_tol`` are merged.

    A small gradient is not enough: on saturated plateaus both the gradient
    and the Hessian are tiny while the nearest zero is far away. A point is
    accepted only if its Newton correction is at most ``step_tol (1 + ||x||)``;
    rejected points go to ``failures`` with note ``"plateau"``.
    """
    if model.smoothness != SMOOTH:
        raise UnsupportedOperation(f"{model.name} is not smooth")
    found, failures = [], []
    for s in seeds:
        x0 = model.check_point(s)
        x, gn, note = _polish(model, x0.copy(), grad_tol, max_iter)
        if gn > grad_tol:
            failures.append({"seed": [float(v) for v in x0], "best": [float(v) for v in x],
                             "grad_norm": gn, "note": note})
            continue
        corr = newton_correction(model, x)
        if corr > step_tol * (1 + np.linalg.norm(x)):
            failures.append({"seed": [float(v) for v in x0], "best": [float(v) for v in x],
                             "grad_norm": gn, "note": "plateau", "newton_correction": corr})
            continue
        if any(np.linalg.norm(x - r.point) <= dedupe_tol for r in found):
            continue
        found.append(_record(model, x, note=note))
    return CriticalSearch(found, failures, cluster_values([r.value for r in found], value_tol))
