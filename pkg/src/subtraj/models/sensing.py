"""Random sensing ensembles and their lower-bound / RIP estimates."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

# ratios below this are treated as zero (ensemble not lower bounded)
RATIO_FLOOR = 1e-12


@dataclass(frozen=True)
class SensingEnsemble:
    """Sensing matrices ``A`` (m, n1, n2) with measurements ``b_i = <A_i, M>``.

    ``lower_bound_c`` is the smallest observed ratio
    ``(1/m) sum_i <A_i, M~>^2 / ||M~||_F^2`` over probe matrices of rank <= r,
    or None when some probe gives ratio zero. ``certified_c`` is the smallest
    eigenvalue of the full measurement Gram operator, a valid lower bound
    for every matrix (zero when m < n1 n2).
    """

    A: np.ndarray
    b: np.ndarray
    r: int
    planted: Optional[np.ndarray] = None
    lower_bound_c: Optional[float] = None
    certified_c: float = 0.0
    rip_level: Optional[Tuple[int, float]] = None
    seed: Optional[int] = None

    @property
    def m(self):
        return self.A.shape[0]

    def measure(self, Mt):
        return np.einsum("kij,ij->k", self.A, np.asarray(Mt, dtype=float))

    def ratio(self, Mt):
        Mt = np.asarray(Mt, dtype=float)
        nrm = float(np.sum(Mt * Mt))
        a = self.measure(Mt)
        return float(a @ a) / self.m / nrm

    def params(self):
        if self.seed is not None:
            m, n1, n2 = self.A.shape
            return {"seed": self.seed, "m": m, "n1": n1, "n2": n2, "rank": self.r}
        return {"A": self.A.tolist(), "b": self.b.tolist(), "rank": self.r}


def probe_ratios(A, r, samples=1000, rng=None):
    """Measurement ratios over rank-<=r probes: all e_i e_j^T plus random ones."""
    A = np.asarray(A, dtype=float)
    m, n1, n2 = A.shape
    rng = np.random.default_rng(0) if rng is None else rng
    probes = []
    for i in range(n1):
        for j in range(n2):
            E = np.zeros((n1, n2))
            E[i, j] = 1.0
            probes.append(E)
    for _ in range(samples):
        probes.append(rng.standard_normal((n1, r)) @ rng.standard_normal((n2, r)).T)
    P = np.array(probes)
    meas = np.einsum("kij,pij->pk", A, P)
    return np.sum(meas * meas, axis=1) / m / np.sum(P * P, axis=(1, 2))


def ensemble_from_matrices(A, r, M=None, b=None, samples=1000, rng=None, seed=None):
    """Wrap explicit sensing matrices and estimate their lower bound."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 2:
        A = A[None]
    m, n1, n2 = A.shape
    if b is None:
        b = np.einsum("kij,ij->k", A, M) if M is not None else np.zeros(m)
    ratios = probe_ratios(A, r, samples, rng)
    cmin = float(ratios.min())
    lower = cmin if cmin > RATIO_FLOOR else None
    G = A.reshape(m, -1)
    certified = max(float(np.linalg.eigvalsh(G.T @ G / m)[0]), 0.0)
    delta = float(np.max(np.abs(ratios - 1.0)))
    rip = (int(r), delta) if delta < 1.0 else None
    return SensingEnsemble(A=A, b=np.asarray(b, dtype=float), r=int(r),
                           planted=None if M is None else np.asarray(M, dtype=float),
                           lower_bound_c=lower, certified_c=certified,
                           rip_level=rip, seed=seed)


def build_sensing_ensemble(seed, m, n1, n2, r, samples=1000):
    """Gaussian ensemble with a planted rank-r target; deterministic in ``seed``.

    Entries of ``A_i`` are i.i.d. N(0, 1); the planted matrix is ``U V^T`` with
    Gaussian factors.
    """
    if m < 1 or min(n1, n2, r) < 1:
        raise ValueError("m, n1, n2, r must all be >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n1, n2))
    M = rng.standard_normal((n1, r)) @ rng.standard_normal((n2, r)).T
    return ensemble_from_matrices(A, r, M=M, samples=samples, rng=rng, seed=seed)
