"""Declarative experiment configuration (TOML or JSON).

Schema::

    [model]
    name = "matrix-completion-ex1"      # registry name
    params = {}                         # constructor keywords

    [method]
    name = "euler"                      # euler | flow | prox
    step = 0.01                         # euler: step, max_iters, critical_tol,
    max_iters = 50000                   #   divergence_guard, record_every
                                        # flow: t_end, rel_tol, abs_tol, n_samples
                                        # prox: tau, inner_tol, inner_max_iters, outer_steps

    [init]
    kind = "uniform"                    # uniform | points
    low = -1.0                          # scalar or per-axis list
    high = 1.0
    # points = [[1, 1, 1, 1]]           # kind = "points": trial i uses points[i % len]

    [run]
    trials = 1000
    seed = 42
    workers = 1
    diagnostics = ["boundedness"]
    outputs = []

    [stuck_rule]
    center = 1.0
    half_width = 0.2
    min_plateau_iters = 500
    grad_tol = 1e-2
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from ..errors import ConfigError
from ..models import REGISTRY

METHODS = ("euler", "flow", "prox")
INIT_KINDS = ("uniform", "points")
DIAGNOSTICS = ("boundedness",)

METHOD_KEYS = {
    "euler": {"step", "max_iters", "critical_tol", "divergence_guard", "record_every"},
    "flow": {"t_end", "rel_tol", "abs_tol", "n_samples", "divergence_guard"},
    "prox": {"tau", "inner_tol", "inner_max_iters", "outer_steps"},
}


@dataclass(frozen=True)
class StuckRule:
    """A trial is stuck when its terminal value lies in
    ``[center - half_width, center + half_width]`` after at least
    ``min_plateau_iters`` final iterations with subgradient norm below
    ``grad_tol``."""

    center: float = 1.0
    half_width: float = 0.2
    min_plateau_iters: int = 500
    grad_tol: float = 1e-2

    def __post_init__(self):
        if not self.half_width > 0:
            raise ConfigError("stuck_rule.half_width must be positive")
        if self.min_plateau_iters < 0 or not self.grad_tol > 0:
            raise ConfigError("stuck_rule needs min_plateau_iters >= 0 and grad_tol > 0")

    def in_band(self, value):
        return abs(value - self.center) <= self.half_width

    def to_dict(self):
        return {"center": self.center, "half_width": self.half_width,
                "min_plateau_iters": self.min_plateau_iters, "grad_tol": self.grad_tol}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    method: str = "euler"
    model_params: dict = field(default_factory=dict)
    method_params: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    init: dict = field(default_factory=lambda: {"kind": "uniform", "low": -1.0, "high": 1.0})
    outputs: tuple = ()
    stuck_rule: StuckRule = field(default_factory=StuckRule)
    diagnostics: tuple = ("boundedness",)
    workers: int = 1

    def __post_init__(self):
        if self.model not in REGISTRY:
            raise ConfigError(f"unknown model {self.model!r}; known: {sorted(REGISTRY)}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; use one of {METHODS}")
        extra = set(self.method_params) - METHOD_KEYS[self.method]
        if extra:
            raise ConfigError(f"unknown {self.method} parameters: {sorted(extra)}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be an integer >= 1")
        kind = self.init.get("kind")
        if kind not in INIT_KINDS:
            raise ConfigError(f"init.kind must be one of {INIT_KINDS}")
        if kind == "points" and not self.init.get("points"):
            raise ConfigError("init.points must list at least one point")
        bad = set(self.diagnostics) - set(DIAGNOSTICS)
        if bad:
            raise ConfigError(f"unknown diagnostics {sorted(bad)}")
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    def to_dict(self):
        return {
            "model": {"name": self.model, "params": copy.deepcopy(self.model_params)},
            "method": {"name": self.method, **copy.deepcopy(self.method_params)},
            "init": copy.deepcopy(self.init),
            "run": {"trials": self.trials, "seed": self.seed, "workers": self.workers,
                    "diagnostics": list(self.diagnostics), "outputs": list(self.outputs)},
            "stuck_rule": self.stuck_rule.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            d = copy.deepcopy(dict(d))
            model = dict(d.pop("model"))
            method = dict(d.pop("method", {"name": "euler"}))
            run = dict(d.pop("run", {}))
            init = dict(d.pop("init", {"kind": "uniform", "low": -1.0, "high": 1.0}))
            stuck = dict(d.pop("stuck_rule", {}))
            if d:
                raise ConfigError(f"unknown config sections {sorted(d)}")
            unknown = set(run) - {"trials", "seed", "workers", "diagnostics", "outputs"}
            if unknown:
                raise ConfigError(f"unknown run keys {sorted(unknown)}")
            return cls(model=model.pop("name"), model_params=dict(model.pop("params", {})),
                       method=method.pop("name", "euler"), method_params=method,
                       trials=run.get("trials", 1), seed=run.get("seed", 0),
                       workers=run.get("workers", 1),
                       diagnostics=tuple(run.get("diagnostics", ("boundedness",))),
                       outputs=tuple(run.get("outputs", ())), init=init,
                       stuck_rule=StuckRule(**stuck))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    def with_overrides(self, **kw):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return ExperimentConfig(**d)


def dumps_config(cfg: ExperimentConfig, fmt="toml") -> str:
    d = cfg.to_dict()
    if fmt == "json":
        return json.dumps(d, sort_keys=True, indent=2)
    if fmt == "toml":
        return tomli_w.dumps(d)
    raise ConfigError(f"unknown config format {fmt!r}")


def loads_config(text, fmt="toml") -> ExperimentConfig:
    try:
        if fmt == "json":
            d = json.loads(text)
        elif fmt == "toml":
            d = tomli.loads(text)
        else:
            raise ConfigError(f"unknown config format {fmt!r}")
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return ExperimentConfig.from_dict(d)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text, "json" if path.suffix.lower() == ".json" else "toml")
