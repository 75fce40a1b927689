"""Low-dimensional objectives: the 2x2 completion example, the sigmoid toys,
the scalar counterexamples, and a few reference functions."""
import math

import numpy as np

from .base import PIECEWISE, LossModel, sigmoid

SQRT2 = math.sqrt(2.0)


class Quadratic(LossModel):
    """Half squared norm, ``0.5 * ||x||^2``."""

    name = "quadratic"

    def __init__(self, dim=1):
        super().__init__(dim, known_infimum=0.0, known_critical_values={0.0})

    def _value(self, x):
        return 0.5 * float(x @ x)

    def _subgradient(self, x):
        return x.copy(), True

    def _hessian(self, x):
        return np.eye(self.dim)

    has_prox = True

    def prox(self, x, tau):
        return np.asarray(x, dtype=float) / (1.0 + tau)

    def value_batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return 0.5 * np.sum(X * X, axis=1)

    def gradient_batch(self, X):
        return np.asarray(X, dtype=float).reshape(-1, self.dim).copy()

    def params(self):
        return {"dim": self.dim}


class AbsNorm(LossModel):
    """l1 norm ``sum |x_i|``; selection 0 on zero entries."""

    name = "abs"
    smoothness = PIECEWISE
    selection_rule = "sign-zero-at-kink"

    def __init__(self, dim=1):
        super().__init__(dim, known_infimum=0.0, known_critical_values={0.0})

    def _value(self, x):
        return float(np.sum(np.abs(x)))

    def _subgradient(self, x):
        return np.sign(x), bool(np.all(x != 0))

    has_prox = True

    def prox(self, x, tau):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)

    def value_batch(self, X):
        return np.sum(np.abs(np.asarray(X, dtype=float).reshape(-1, self.dim)), axis=1)

    def params(self):
        return {"dim": self.dim}


class Constant(LossModel):
    name = "constant"

    def __init__(self, dim=1, c=0.0):
        self.c = float(c)
        super().__init__(dim, known_infimum=self.c, known_critical_values={self.c})

    def _value(self, x):
        return self.c

    def _subgradient(self, x):
        return np.zeros_like(x), True

    def _hessian(self, x):
        return np.zeros((self.dim, self.dim))

    has_prox = True

    def prox(self, x, tau):
        return np.array(x, dtype=float)

    def value_batch(self, X):
        return np.full(np.asarray(X).reshape(-1, self.dim).shape[0], self.c)

    def gradient_batch(self, X):
        return np.zeros_like(np.asarray(X, dtype=float).reshape(-1, self.dim))

    def params(self):
        return {"dim": self.dim, "c": self.c}


class MatrixCompletionEx1(LossModel):
    """``(x1 y1 - 1)^2 + (x2 y1 - 1)^2 + (x2 y2 - 1)^2`` in the order (x1, x2, y1, y2)."""

    name = "matrix-completion-ex1"

    def __init__(self):
        super().__init__(4, structure={"shapes": [(2, 1), (2, 1)]},
                         known_infimum=0.0, known_critical_values={0.0, 2.0, 3.0})

    @staticmethod
    def _residuals(Z):
        x1, x2, y1, y2 = Z[..., 0], Z[..., 1], Z[..., 2], Z[..., 3]
        return x1 * y1 - 1.0, x2 * y1 - 1.0, x2 * y2 - 1.0

    def _value(self, x):
        r1, r2, r3 = self._residuals(x)
        return r1 * r1 + r2 * r2 + r3 * r3

    def _grad(self, Z):
        x1, x2, y1, y2 = Z[..., 0], Z[..., 1], Z[..., 2], Z[..., 3]
        r1, r2, r3 = self._residuals(Z)
        return np.stack([2 * r1 * y1,
                         2 * r2 * y1 + 2 * r3 * y2,
                         2 * r1 * x1 + 2 * r2 * x2,
                         2 * r3 * x2], axis=-1)

    def _subgradient(self, x):
        return self._grad(x), True

    def _hessian(self, x):
        x1, x2, y1, y2 = x
        r1, r2, r3 = self._residuals(x)
        H = np.zeros((4, 4))
        H[0, 0] = 2 * y1 * y1
        H[1, 1] = 2 * (y1 * y1 + y2 * y2)
        H[2, 2] = 2 * (x1 * x1 + x2 * x2)
        H[3, 3] = 2 * x2 * x2
        H[0, 2] = H[2, 0] = 2 * (x1 * y1 + r1)
        H[1, 2] = H[2, 1] = 2 * (x2 * y1 + r2)
        H[1, 3] = H[3, 1] = 2 * (x2 * y2 + r3)
        return H

    def value_batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, 4)
        r1, r2, r3 = self._residuals(X)
        return r1 * r1 + r2 * r2 + r3 * r3

    def gradient_batch(self, X):
        return self._grad(np.asarray(X, dtype=float).reshape(-1, 4))


class _TwoDataSigmoid(LossModel):
    """``0.5 [(w2 s(w1) - 1)^2 + (w2 s(-w1) + b)^2]`` with s the logistic function."""

    offset = 1.0

    def __init__(self, **kw):
        super().__init__(2, structure={"shapes": [(1,), (1,)]}, **kw)

    def _parts(self, W):
        w1, w2 = W[..., 0], W[..., 1]
        s = sigmoid(w1)
        sm = sigmoid(-w1)
        return w1, w2, s, sm, w2 * s - 1.0, w2 * sm + self.offset

    def _value(self, x):
        *_, r1, r2 = self._parts(x)
        return 0.5 * (r1 * r1 + r2 * r2)

    def _grad(self, W):
        w1, w2, s, sm, r1, r2 = self._parts(W)
        ds = s * sm
        return np.stack([w2 * ds * (r1 - r2), r1 * s + r2 * sm], axis=-1)

    def _subgradient(self, x):
        return self._grad(x), True

    def value_batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        *_, r1, r2 = self._parts(X)
        return 0.5 * (r1 * r1 + r2 * r2)

    def gradient_batch(self, X):
        return self._grad(np.asarray(X, dtype=float).reshape(-1, 2))


class SigmoidTwoData(_TwoDataSigmoid):
    """Two data points (1, 1) and (-1, -1): a single critical point, the
    strict saddle (0, 0) with value 1; the infimum 1/2 is only approached
    at infinity."""

    name = "sigmoid-two-data"
    offset = 1.0

    def __init__(self):
        super().__init__(known_infimum=0.5, known_critical_values={1.0})


class SigmoidFig3(_TwoDataSigmoid):
    """Two data points (1, 1) and (-1, -3); local minimum at infinity as w1 -> +inf.

    Minimising over w2 for fixed s = sigmoid(w1) leaves
    ``5 - (4s - 3)^2 / (2 (2s^2 - 2s + 1))``, whose infimum 1/2 is approached
    only as s -> 0.
    """

    name = "sigmoid-fig3"
    offset = 3.0

    def __init__(self):
        super().__init__(known_infimum=0.5)


class ReluToy(LossModel):
    """``(x2 max(x1, 0) - 1)^2``; selection uses 0 for the ReLU slope at x1 = 0."""

    name = "relu-toy"
    smoothness = PIECEWISE
    selection_rule = "relu-slope-zero-at-kink"

    def __init__(self):
        super().__init__(2, known_infimum=0.0)

    def _value(self, x):
        return (x[1] * max(x[0], 0.0) - 1.0) ** 2

    def _subgradient(self, x):
        m = max(x[0], 0.0)
        r = x[1] * m - 1.0
        active = 1.0 if x[0] > 0 else 0.0
        unique = x[0] != 0 or x[1] == 0
        return np.array([2 * r * x[1] * active, 2 * r * m]), unique

    def value_batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        return (X[:, 1] * np.maximum(X[:, 0], 0.0) - 1.0) ** 2


class CexUnbounded(LossModel):
    """``x^2 (1 + x^2) / (1 + x^4)``: no spurious minima, yet the flow from
    x0 = 2 escapes to infinity."""

    name = "cex-unbounded"

    def __init__(self):
        xs = (SQRT2 - 1.0) ** -0.5
        super().__init__(1, known_infimum=0.0,
                         known_critical_values={0.0, self.f(xs)})

    @staticmethod
    def f(x):
        x2 = x * x
        return x2 * (1.0 + x2) / (1.0 + x2 * x2)

    @staticmethod
    def fprime(x):
        x2 = x * x
        return -2.0 * x * (x2 * x2 - 2.0 * x2 - 1.0) / (x2 * x2 + 1.0) ** 2

    @staticmethod
    def separation_potential(x):
        """Closed-form ``g`` with ``g(x(t)) = g(x0) + 2t`` along the flow.

        Valid for ``x > (sqrt(2) - 1)^(-1/2)``, where the flow is increasing.
        """
        x = np.asarray(x, dtype=float)
        x2 = x * x
        return (0.25 * x2 * x2 + x2 + (2 + SQRT2) * np.log(x2 - SQRT2 - 1)
                + (2 - SQRT2) * np.log(x2 + SQRT2 - 1) - np.log(x))

    def _value(self, x):
        return self.f(x[0])

    def _subgradient(self, x):
        return np.array([self.fprime(x[0])]), True

    def value_batch(self, X):
        return self.f(np.asarray(X, dtype=float).reshape(-1))

    def gradient_batch(self, X):
        return self.fprime(np.asarray(X, dtype=float).reshape(-1, 1))


class CexInfiniteCritical(LossModel):
    """C^1 scalar function with critical points -4 and 2k (k >= 0) and
    critical values {-8} and {-3 (1 - 2^-k)}."""

    name = "cex-infinite-critical"

    def __init__(self):
        super().__init__(1, known_infimum=-8.0)

    @staticmethod
    def _branches(x):
        x = np.asarray(x, dtype=float)
        n = np.floor(np.where(x > 0, x, 0.0))
        even = (n % 2 == 0)
        # [2k, 2k+1] for even floor, [2k-1, 2k] for odd floor
        k = np.where(even, n / 2, (n + 1) / 2)
        u = x - 2 * k
        sgn = np.where(even, -1.0, 1.0)
        return x, k, u, sgn

    @classmethod
    def f(cls, x):
        x, k, u, sgn = cls._branches(x)
        e = np.exp2(k + 1)
        with np.errstate(under="ignore"):
            pos = sgn * np.exp2(-k) * np.abs(u) ** e - 3.0 * (1.0 - np.exp2(-k))
        return np.where(x <= -2, (x + 4) ** 2 - 8,
                        np.where(x <= 0, -x * x, pos))

    @classmethod
    def fprime(cls, x):
        x, k, u, sgn = cls._branches(x)
        e = np.exp2(k + 1)
        with np.errstate(under="ignore"):
            pos = sgn * 2.0 * np.sign(u) * np.abs(u) ** (e - 1)
        return np.where(x <= -2, 2 * (x + 4), np.where(x <= 0, -2 * x, pos))

    def _value(self, x):
        return float(self.f(x[0]))

    def _subgradient(self, x):
        return np.array([float(self.fprime(x[0]))]), True

    def value_batch(self, X):
        return self.f(np.asarray(X, dtype=float).reshape(-1))

    def gradient_batch(self, X):
        return self.fprime(np.asarray(X, dtype=float).reshape(-1, 1))


class Oscillatory(LossModel):
    """0 for x <= 0 and ``x^2 sin(1/x)`` for x > 0.

    Differentiable with f'(0) = 0, but the derivative oscillates in [-1, 1]
    near 0, so the Clarke subdifferential at 0 is the whole interval.
    """

    name = "oscillatory"
    smoothness = PIECEWISE
    selection_rule = "zero-at-origin"

    def __init__(self):
        super().__init__(1)

    @staticmethod
    def f(x):
        x = np.asarray(x, dtype=float)
        xp = np.where(x > 0, x, 1.0)
        return np.where(x > 0, xp * xp * np.sin(1.0 / xp), 0.0)

    def _value(self, x):
        return float(self.f(x[0]))

    def _subgradient(self, x):
        t = x[0]
        if t > 0:
            return np.array([2 * t * np.sin(1 / t) - np.cos(1 / t)]), True
        return np.zeros(1), t < 0

    def value_batch(self, X):
        return self.f(np.asarray(X, dtype=float).reshape(-1))
