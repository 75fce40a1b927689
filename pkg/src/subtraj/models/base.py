"""Loss-model interface and the generic evaluation entry points."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteError, ShapeError, UnsupportedOperation

SMOOTH = "smooth"
PIECEWISE = "piecewise-smooth"

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SubgradientSelection:
    """One element of the Clarke subdifferential at a query point.

    ``is_unique`` is False exactly where the subdifferential is not a singleton.
    """

    vector: np.ndarray
    is_unique: bool
    selection_rule: str = "gradient"

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


class LossModel:
    """Base class for an objective ``f: R^dim -> R``.

    Subclasses implement ``_value`` and ``_subgradient`` on validated 1-D
    float arrays. ``_hessian`` and ``prox`` are optional.

    Attributes
    ----------
    name : str
        Registry identifier.
    dim : int
        Flattened parameter count.
    structure : dict
        Shape metadata, e.g. ``{"shapes": [(3, 1), (3, 1)]}`` for factor models.
    smoothness : str
        ``"smooth"`` or ``"piecewise-smooth"``.
    known_infimum : float or None
        Exact infimum when it is known in closed form.
    known_critical_values : frozenset or None
        All critical values, when finitely many and known.
    """

    name = "abstract"
    smoothness = SMOOTH
    selection_rule = "gradient"

    def __init__(self, dim, structure=None, known_infimum=None,
                 known_critical_values=None, lower_bound=None):
        self.dim = int(dim)
        self.structure = dict(structure or {})
        self.known_infimum = known_infimum
        self.known_critical_values = (
            None if known_critical_values is None else frozenset(known_critical_values))
        # certified lower bound, used where the infimum itself is unknown
        self.lower_bound = known_infimum if lower_bound is None else lower_bound

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, dim={self.dim})"

    def value_error(self, x) -> float:
        """Rough bound on the rounding error of ``value(x)``.

        Models whose value sums terms that cancel override this with the
        size of the summed terms.
        """
        return float(np.finfo(float).eps * abs(self._value(x)))

    # --- validation -----------------------------------------------------
    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise ShapeError(f"{self.name}: expected a vector of length {self.dim}, "
                             f"got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"{self.name}: non-finite entries in input")
        return x

    # --- public API -----------------------------------------------------
    def value(self, x) -> float:
        return float(self._value(self.check_point(x)))

    def subgradient(self, x) -> SubgradientSelection:
        x = self.check_point(x)
        g, unique = self._subgradient(x)
        return SubgradientSelection(np.asarray(g, dtype=np.float64), bool(unique),
                                    self.selection_rule)

    def gradient(self, x) -> np.ndarray:
        """Selected subgradient vector, without the uniqueness flag."""
        return self.subgradient(x).vector

    def hessian(self, x) -> np.ndarray:
        if self.smoothness != SMOOTH:
            raise UnsupportedOperation(f"{self.name} is not smooth; Hessian undefined")
        x = self.check_point(x)
        H = self._hessian(x)
        if H is None:
            H = fd_hessian(lambda z: self._subgradient(z)[0], x)
        H = np.asarray(H, dtype=np.float64)
        return 0.5 * (H + H.T)

    has_prox = False

    def prox(self, x, tau):
        """Exact proximal point; only for models with ``has_prox``."""
        raise UnsupportedOperation(f"{self.name} has no registered proximal map")

    # --- batched evaluation (rows of a 2-D array) ------------------------
    def value_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.dim)
        return np.array([self._value(row) for row in X])

    def gradient_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.dim)
        return np.array([self._subgradient(row)[0] for row in X]).reshape(X.shape)

    # --- hooks ------------------------------------------------------------
    def _value(self, x):
        raise NotImplementedError

    def _subgradient(self, x):
        raise NotImplementedError

    def _hessian(self, x):
        return None

    def params(self) -> dict:
        """Construction parameters, JSON-serialisable."""
        return {}


def fd_step(x) -> np.ndarray:
    return np.cbrt(_EPS) * (1.0 + np.abs(x))


def fd_gradient(fun, x) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    h = fd_step(x)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h[i])
    return g


def fd_hessian(grad, x) -> np.ndarray:
    """Central finite-difference Jacobian of ``grad`` (not symmetrised)."""
    x = np.asarray(x, dtype=np.float64)
    h = fd_step(x)
    H = np.empty((x.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        H[:, i] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2 * h[i])
    return H


def eval_value(model: LossModel, x) -> float:
    return model.value(x)


def eval_subgradient(model: LossModel, x) -> SubgradientSelection:
    return model.subgradient(x)


def eval_hessian(model: LossModel, x) -> np.ndarray:
    """Symmetric Hessian; analytic where the model provides one."""
    return model.hessian(x)


def sigmoid(z):
    """Logistic function split at zero so neither branch overflows."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


# column-major flattening per factor, factors concatenated in order
def flatten_factors(mats) -> np.ndarray:
    return np.concatenate([np.asarray(m, dtype=np.float64).ravel(order="F") for m in mats])


def unflatten_factors(x, shapes):
    out, k = [], 0
    for shape in shapes:
        n = int(np.prod(shape))
        out.append(np.asarray(x[k:k + n]).reshape(shape, order="F"))
        k += n
    return out
