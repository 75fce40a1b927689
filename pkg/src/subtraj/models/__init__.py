"""Objective zoo and the name -> constructor registry."""
import numpy as np

from ..errors import ConfigError
from .base import (PIECEWISE, SMOOTH, LossModel, SubgradientSelection, eval_hessian,
                   eval_subgradient, eval_value, fd_gradient, fd_hessian, sigmoid)
from .factor import FactorModel, L1Factorization, LinearNN, MatrixSensing, SigmoidChain
from .sensing import SensingEnsemble, build_sensing_ensemble, ensemble_from_matrices
from .zoo import (AbsNorm, CexInfiniteCritical, CexUnbounded, Constant, MatrixCompletionEx1,
                  Oscillatory, Quadratic, ReluToy, SigmoidFig3, SigmoidTwoData)


def _linear_nn(dims=(3, 3, 2), X=None, Y=None, data_seed=0, n_samples=None, zero_columns=()):
    dims = [int(d) for d in dims]
    rng = np.random.default_rng(data_seed)
    if X is None:
        X = rng.standard_normal((dims[0], n_samples or dims[0]))
        for c in zero_columns:
            X[:, int(c)] = 0.0
    if Y is None:
        Y = rng.standard_normal((dims[-1], np.shape(X)[1]))
    return LinearNN(X, Y, dims)


def _sensing(seed=0, m=20, n1=3, n2=3, rank=1, A=None, b=None, M=None):
    if A is not None:
        ens = ensemble_from_matrices(A, rank, M=M, b=b)
    else:
        ens = build_sensing_ensemble(seed, m, n1, n2, rank)
    return MatrixSensing(ens)


def _l1(M=None, rank=1, seed=0, m=3, n=3):
    if M is None:
        rng = np.random.default_rng(seed)
        u = rng.standard_normal((m, rank))
        v = rng.standard_normal((n, rank))
        M = u @ v.T
    return L1Factorization(M, rank)


REGISTRY = {
    "matrix-completion-ex1": MatrixCompletionEx1,
    "linear-nn": _linear_nn,
    "sigmoid-chain": SigmoidChain,
    "matrix-sensing": _sensing,
    "l1-factorization": _l1,
    "cex-unbounded": CexUnbounded,
    "cex-infinite-critical": CexInfiniteCritical,
    "relu-toy": ReluToy,
    "sigmoid-two-data": SigmoidTwoData,
    "sigmoid-fig3": SigmoidFig3,
    "oscillatory": Oscillatory,
    "quadratic": Quadratic,
    "abs": AbsNorm,
    "constant": Constant,
}


def make_model(name, **params) -> LossModel:
    """Build a registered model from its name and construction parameters."""
    try:
        ctor = REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(REGISTRY)}") from None
    try:
        return ctor(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {name!r}: {exc}") from exc


__all__ = [
    "LossModel", "SubgradientSelection", "SMOOTH", "PIECEWISE",
    "eval_value", "eval_subgradient", "eval_hessian", "fd_gradient", "fd_hessian", "sigmoid",
    "FactorModel", "LinearNN", "SigmoidChain", "MatrixSensing", "L1Factorization",
    "SensingEnsemble", "build_sensing_ensemble", "ensemble_from_matrices",
    "AbsNorm", "CexInfiniteCritical", "CexUnbounded", "Constant", "MatrixCompletionEx1",
    "Oscillatory", "Quadratic", "ReluToy", "SigmoidFig3", "SigmoidTwoData",
    "REGISTRY", "make_model",
]
