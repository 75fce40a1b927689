"""Small dense box-constrained QP solver used by the l1 proximal maps."""
import numpy as np


def solve_box_qp(Q, q, lo=-1.0, hi=1.0, x0=None, max_iter=200, tol=1e-12):
    """Minimise ``0.5 x^T Q x - q^T x`` subject to ``lo <= x <= hi``.

    Primal active-set method for positive semidefinite ``Q``. Subspace
    problems are solved by least squares, so a singular ``Q`` is fine.

    Returns
    -------
    x : ndarray
    converged : bool
    """
    Q = np.asarray(Q, dtype=float)
    q = np.asarray(q, dtype=float)
    n = q.size
    x = np.zeros(n) if x0 is None else np.clip(np.asarray(x0, dtype=float), lo, hi)
    scale = 1.0 + np.max(np.abs(Q), initial=0.0) + np.max(np.abs(q), initial=0.0)
    ktol = tol * scale
    at_lo = x <= lo
    at_hi = x >= hi
    for _ in range(max_iter):
        free = ~(at_lo | at_hi)
        # subspace minimiser over the free variables
        d = np.zeros(n)
        alpha = 1.0
        if free.any():
            fixed = ~free
            Qff = Q[np.ix_(free, free)]
            rhs = q[free] - Q[np.ix_(free, fixed)] @ x[fixed]
            sol, *_ = np.linalg.lstsq(Qff, rhs, rcond=None)
            res = rhs - Qff @ sol
            if np.linalg.norm(res) > ktol:
                # objective unbounded along the null-space part: ride it to a bound
                d[free] = res
                alpha = np.inf
            else:
                d[free] = sol - x[free]
        if np.any(np.abs(d) > 0):
            # largest step keeping the iterate in the box
            blocking = -1
            for i in np.flatnonzero(free & (d != 0)):
                bound = hi if d[i] > 0 else lo
                a = (bound - x[i]) / d[i]
                if a < alpha:
                    alpha, blocking = a, i
            x = x + alpha * d
            if blocking >= 0:
                if d[blocking] > 0:
                    x[blocking] = hi
                    at_hi[blocking] = True
                else:
                    x[blocking] = lo
                    at_lo[blocking] = True
                continue
        # KKT check on the bound constraints
        g = Q @ x - q
        viol = np.zeros(n)
        viol[at_lo] = np.maximum(-g[at_lo], 0.0)   # want g >= 0 at the lower bound
        viol[at_hi] = np.maximum(g[at_hi], 0.0)    # want g <= 0 at the upper bound
        i = int(np.argmax(viol))
        if viol[i] <= ktol:
            return x, True
        at_lo[i] = at_hi[i] = False
    return x, False
