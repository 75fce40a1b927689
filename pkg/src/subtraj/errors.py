"""Exception hierarchy shared across the toolkit."""


class SubtrajError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(SubtrajError, ValueError):
    """Input has the wrong length or shape for the model."""


class NonFiniteError(SubtrajError, ValueError):
    """Input contains NaN or infinite entries."""


class UnsupportedOperation(SubtrajError, TypeError):
    """Operation is not defined for this model (e.g. Hessian of a nonsmooth loss)."""


class StructureError(SubtrajError, ValueError):
    """A diagnostic was applied to a model or record with incompatible structure."""


class DomainError(SubtrajError, ValueError):
    """Parameter outside the domain of a parametric family."""


class BudgetError(SubtrajError, ValueError):
    """A grid request exceeds the configured node budget."""


class ConfigError(SubtrajError, ValueError):
    """Invalid or unreadable experiment configuration."""


class NumericError(SubtrajError, RuntimeError):
    """A numerical routine failed to produce a certified answer."""


class ProxSolveError(NumericError):
    """Inner proximal solver ran out of iterations without a descent certificate.

    Attributes
    ----------
    best : ndarray
        Best iterate found.
    residual : float
        Stationarity residual of ``best`` for the proximal subproblem.
    """

    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class EpsilonSearchError(NumericError):
    """Horizon exhausted before an epsilon-critical pair was found."""

    def __init__(self, message, best_value=float("nan"), best_grad_norm=float("nan")):
        super().__init__(message)
        self.best_value = best_value
        self.best_grad_norm = best_grad_norm


class EnergyBoundError(NumericError):
    """Cumulative movement energy exceeded f(x0) - inf f."""
