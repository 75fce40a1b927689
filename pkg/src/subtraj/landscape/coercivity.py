"""Sphere-sampling probe for (non-)coercivity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CoercivityReport:
    radii: tuple
    minima: tuple
    argmins: tuple
    non_coercive_evidence: bool


def _refine_on_sphere(model, x, r, iters=200):
    """Projected gradient descent restricted to the sphere of radius ``r``."""
    fx = model.value(x)
    step = 0.1 * r
    for _ in range(iters):
        g = model.subgradient(x).vector
        gt = g - (g @ x) / (r * r) * x
        nrm = float(np.linalg.norm(gt))
        if nrm == 0:
            break
        while step > 1e-12 * r:
            y = x - step * gt / nrm
            y *= r / np.linalg.norm(y)
            fy = model.value(y)
            if fy < fx:
                x, fx = y, fy
                step *= 1.5
                break
            step *= 0.5
        else:
            break
    return x, fx


def coercivity_probe(model, radii, samples_per_radius=1000, seed=0, refine=5,
                     rel_tol=1e-9) -> CoercivityReport:
    """Minimum of ``f`` over random points of each sphere ``||x|| = r``.

    The best ``refine`` samples per radius are improved by projected
    descent on the sphere, so thin low-value sets are not missed. Evidence
    of non-coercivity is flagged when the per-radius minimum fails to
    increase strictly between consecutive radii in the upper half.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
        raise ValueError("radii must be positive and increasing")
    rng = np.random.default_rng(seed)
    minima, argmins = [], []
    for r in radii:
        D = rng.standard_normal((samples_per_radius, model.dim))
        D *= r / np.linalg.norm(D, axis=1, keepdims=True)
        v = model.value_batch(D)
        order = np.argsort(v, kind="stable")
        best_x, best_f = D[order[0]], float(v[order[0]])
        for j in order[:refine]:
            x, fx = _refine_on_sphere(model, D[j].copy(), r)
            if fx < best_f:
                best_x, best_f = x, fx
        minima.append(best_f)
        argmins.append(tuple(float(c) for c in best_x))
    half = minima[len(minima) // 2:]
    flat = any(b <= a + rel_tol * (1 + abs(a)) for a, b in zip(half, half[1:]))
    return CoercivityReport(tuple(radii), tuple(minima), tuple(argmins), bool(flat))
