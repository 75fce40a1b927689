"""Factorised objectives: deep linear network, 1-D sigmoid chain, matrix
sensing and l1 matrix factorisation.

All matrix variables are flattened column-major per factor, factors in the
order W_1..W_L, or X then Y.
"""
import numpy as np

from ..errors import ProxSolveError, ShapeError
from .base import PIECEWISE, LossModel, flatten_factors, sigmoid, unflatten_factors
from .boxqp import solve_box_qp

# relative width, in ulps, of the band of residuals treated as kinks
KINK_ULPS = 16


class FactorModel(LossModel):
    """Model whose variable is a list of matrices."""

    def __init__(self, shapes, **kw):
        shapes = [tuple(int(s) for s in shape) for shape in shapes]
        dim = sum(int(np.prod(s)) for s in shapes)
        super().__init__(dim, structure={"shapes": shapes}, **kw)
        self.shapes = shapes

    def unflatten(self, x):
        return unflatten_factors(np.asarray(x, dtype=float), self.shapes)

    def flatten(self, mats):
        mats = list(mats)
        for m, s in zip(mats, self.shapes):
            if np.shape(m) != s:
                raise ShapeError(f"factor shape {np.shape(m)} != {s}")
        return flatten_factors(mats)


class LinearNN(FactorModel):
    """``0.5 ||W_L ... W_1 X - Y||_F^2`` with ``W_i`` of shape (d_i, d_{i-1})."""

    name = "linear-nn"

    def __init__(self, X, Y, dims=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if dims is None:
            raise ShapeError("linear-nn needs layer widths dims=(d_0, ..., d_L)")
        dims = [int(d) for d in dims]
        if X.shape[0] != dims[0] or Y.shape[0] != dims[-1] or X.shape[1] != Y.shape[1]:
            raise ShapeError(f"data shapes X{X.shape}, Y{Y.shape} incompatible with dims {dims}")
        self.X, self.Y, self.dims = X, Y, dims
        shapes = [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]
        super().__init__(shapes, lower_bound=0.0)
        self.structure["dims"] = dims

    @property
    def depth(self):
        return len(self.dims) - 1

    def _forward(self, Ws):
        acts = [self.X]
        for W in Ws:
            acts.append(W @ acts[-1])
        return acts

    def _value(self, x):
        R = self._forward(self.unflatten(x))[-1] - self.Y
        return 0.5 * float(np.sum(R * R))

    def _subgradient(self, x):
        Ws = self.unflatten(x)
        acts = self._forward(Ws)
        back = acts[-1] - self.Y
        grads = [None] * len(Ws)
        for i in range(len(Ws) - 1, -1, -1):
            grads[i] = back @ acts[i].T
            back = Ws[i].T @ back
        return flatten_factors(grads), True

    def params(self):
        return {"dims": self.dims, "X": self.X.tolist(), "Y": self.Y.tolist()}


class SigmoidChain(LossModel):
    """``0.5 (w_L s(w_{L-1} ... s(w_1 x)) - y)^2`` for scalar weights."""

    name = "sigmoid-chain"

    def __init__(self, L=3, x=1.0, y=0.8):
        if int(L) < 2:
            raise ShapeError("sigmoid-chain needs L >= 2")
        self.L, self.x, self.y = int(L), float(x), float(y)
        super().__init__(self.L, structure={"chain_length": self.L},
                         known_infimum=0.0, known_critical_values={0.0})

    def _forward(self, w):
        p = [self.x]
        for i in range(self.L - 1):
            p.append(float(sigmoid(w[i] * p[-1])))
        return p

    def _value(self, w):
        p = self._forward(w)
        r = w[-1] * p[-1] - self.y
        return 0.5 * r * r

    def _subgradient(self, w):
        p = self._forward(w)
        r = w[-1] * p[-1] - self.y
        g = np.empty(self.L)
        g[-1] = r * p[-1]
        delta = r * w[-1]
        for i in range(self.L - 2, -1, -1):
            ds = p[i + 1] * (1.0 - p[i + 1])
            g[i] = delta * ds * p[i]
            delta = delta * ds * w[i]
        return g, True

    def params(self):
        return {"L": self.L, "x": self.x, "y": self.y}


class MatrixSensing(FactorModel):
    """``(1/2m) sum_i (<A_i, X Y^T>_F - b_i)^2`` with X (n1, r), Y (n2, r)."""

    name = "matrix-sensing"

    def __init__(self, ensemble, r=None):
        self.ensemble = ensemble
        A = ensemble.A
        self.m, self.n1, self.n2 = A.shape
        self.r = int(ensemble.r if r is None else r)
        super().__init__([(self.n1, self.r), (self.n2, self.r)], lower_bound=0.0)
        if ensemble.planted is not None and np.linalg.matrix_rank(ensemble.planted) <= self.r:
            self.known_infimum = 0.0

    def _residual(self, X, Y):
        return np.einsum("kij,ij->k", self.ensemble.A, X @ Y.T) - self.ensemble.b

    def _value(self, x):
        X, Y = self.unflatten(x)
        res = self._residual(X, Y)
        return float(res @ res) / (2 * self.m)

    def _subgradient(self, x):
        X, Y = self.unflatten(x)
        res = self._residual(X, Y)
        G = np.einsum("k,kij->ij", res, self.ensemble.A) / self.m
        return flatten_factors([G @ Y, G.T @ X]), True

    def params(self):
        return {"r": self.r, **self.ensemble.params()}


class L1Factorization(FactorModel):
    """``||X Y^T - M||_1`` (entrywise) with X (m, r), Y (n, r).

    The selection takes Lambda = sign(X Y^T - M) with 0 on zero residuals,
    so exact factorisations are stationary. Residuals within a few ulps of
    the product scale count as zero.
    """

    name = "l1-factorization"
    smoothness = PIECEWISE
    selection_rule = "sign-zero-at-kink"

    def __init__(self, M, r=1):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        self.M = M
        self.m, self.n = M.shape
        self.r = int(r)
        super().__init__([(self.m, self.r), (self.n, self.r)], lower_bound=0.0)
        if np.linalg.matrix_rank(M) <= self.r:
            self.known_infimum = 0.0
        self.structure["M_shape"] = (self.m, self.n)

    def residual(self, x):
        X, Y = self.unflatten(x)
        return X @ Y.T - self.M

    def _value(self, x):
        return float(np.sum(np.abs(self.residual(x))))

    def value_error(self, x):
        X, Y = self.unflatten(x)
        scale = np.abs(X) @ np.abs(Y).T + np.abs(self.M)
        return float(KINK_ULPS * np.finfo(float).eps * scale.sum())

    def _kink_mask(self, X, Y, R):
        # residuals at the rounding level of the product count as exact zeros
        scale = np.abs(X) @ np.abs(Y).T + np.abs(self.M)
        return np.abs(R) <= KINK_ULPS * np.finfo(float).eps * scale

    def lam(self, x):
        """Selected multiplier Lambda in sign(X Y^T - M), 0 on kinks."""
        X, Y = self.unflatten(x)
        R = X @ Y.T - self.M
        return np.where(self._kink_mask(X, Y, R), 0.0, np.sign(R))

    def _subgradient(self, x):
        X, Y = self.unflatten(x)
        R = X @ Y.T - self.M
        zero = self._kink_mask(X, Y, R)
        Lam = np.where(zero, 0.0, np.sign(R))
        # the subdifferential is a singleton iff no zero residual touches a nonzero factor row
        unique = not np.any(zero & ((np.abs(X).sum(1)[:, None] + np.abs(Y).sum(1)[None, :]) > 0))
        return flatten_factors([Lam @ Y, Lam.T @ X]), unique

    def subgradient_from_lambda(self, x, Lam):
        X, Y = self.unflatten(x)
        return flatten_factors([Lam @ Y, Lam.T @ X])

    def in_sign_set(self, x, Lam, tol=0.0):
        """True if Lam lies in sign(X Y^T - M) entrywise."""
        X, Y = self.unflatten(x)
        R = X @ Y.T - self.M
        Lam = np.asarray(Lam, dtype=float)
        ok_box = np.all(np.abs(Lam) <= 1 + tol)
        nz = ~self._kink_mask(X, Y, R)
        return bool(ok_box and np.all(np.abs(Lam[nz] - np.sign(R[nz])) <= tol))

    def _jacobian(self, X, Y):
        # d vec_rowmajor(X Y^T) / d (vec_F X, vec_F Y)
        m, n, r = self.m, self.n, self.r
        J = np.zeros((m * n, (m + n) * r))
        for i in range(m):
            for j in range(n):
                row = i * n + j
                for c in range(r):
                    J[row, c * m + i] = Y[j, c]
                    J[row, m * r + c * n + j] = X[i, c]
        return J

    has_prox = True

    def prox(self, x0, tau):
        return self.prox_with_multiplier(x0, tau)[0]

    def prox_with_multiplier(self, x0, tau, tol=1e-13, max_iter=500):
        """Proximal point and its multiplier Lambda of the l1 factorisation loss.

        Prox-linear iterations: linearise ``X Y^T`` at the current iterate,
        add the curvature majorant ``(mu/2)||z - z_k||^2`` with
        ``mu = sqrt(m n)`` (a bound on the weak convexity modulus), and solve
        the convex subproblem exactly through its box-constrained dual. At a
        fixed point ``(z - x0)/tau = -(Lam Y, Lam^T X)`` with one common
        ``Lam`` in sign(X Y^T - M). For ``tau < 1/mu`` the subproblem is
        strongly convex and the fixed point is its global minimiser.
        """
        z0 = self.check_point(x0)
        mu = np.sqrt(self.m * self.n)
        beta = 1.0 / tau + mu
        z = z0.copy()
        lam = np.zeros(self.m * self.n)
        for _ in range(max_iter):
            X, Y = self.unflatten(z)
            J = self._jacobian(X, Y)
            c = (X @ Y.T - self.M).ravel()
            w = (z0 / tau + mu * z) / beta
            # linearised residual at w: c + J (w - z)
            q = c + J @ (w - z)
            lam, ok = solve_box_qp(J @ J.T / beta, q, x0=lam)
            if not ok:
                raise ProxSolveError("box QP did not converge", best=z, residual=np.nan)
            z_new = w - J.T @ lam / beta
            step = np.linalg.norm(z_new - z)
            z = z_new
            if step <= tol * (1.0 + np.linalg.norm(z)):
                break
        else:
            raise ProxSolveError("prox-linear iterations exhausted", best=z, residual=step)
        return z, lam.reshape(self.m, self.n)

    def params(self):
        return {"M": self.M.tolist(), "r": self.r}
