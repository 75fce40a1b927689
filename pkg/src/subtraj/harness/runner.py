"""Seeded multi-trial experiments and their manifests."""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..diagnostics import classify_boundedness
from ..errors import ConfigError
from ..flows import (DEFAULT_CRITICAL_TOL, DEFAULT_DIVERGENCE_GUARD, ProxSchedule,
                     TrajectoryRecord, euler_descent_batch, gradient_flow, minimizing_movement)
from ..models import make_model
from .config import ExperimentConfig
from .rng import substream


@dataclass(frozen=True)
class RunManifest:
    """Outcome of :func:`run_experiment`.

    ``to_json`` omits the wall time so that identical runs serialise to
    identical bytes; it is kept on the object and written separately.
    """

    config: dict
    trials: list
    stuck_fraction: float
    version: str
    wall_time: float = 0.0

    def to_dict(self, include_timing=False):
        d = {"config": self.config, "trials": self.trials,
             "stuck_fraction": self.stuck_fraction, "version": self.version,
             "n_trials": len(self.trials),
             "n_stuck": sum(1 for t in self.trials if t["stuck"])}
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=1)


def trial_inits(cfg: ExperimentConfig, dim, indices):
    init = cfg.init
    out = []
    for i in indices:
        if init["kind"] == "points":
            pts = init["points"]
            x = np.asarray(pts[i % len(pts)], dtype=float)
        else:
            lo = np.broadcast_to(np.asarray(init.get("low", -1.0), dtype=float), (dim,))
            hi = np.broadcast_to(np.asarray(init.get("high", 1.0), dtype=float), (dim,))
            x = substream(cfg.seed, i).uniform(lo, hi)
        if x.shape != (dim,):
            raise ConfigError(f"init point for trial {i} has shape {x.shape}, need ({dim},)")
        out.append(x)
    return np.array(out)


def _trailing_plateau(grad_norms, tol):
    n = 0
    for g in grad_norms[::-1]:
        if g >= tol:
            break
        n += 1
    return n


def _euler_chunk(cfg, model, indices):
    p = cfg.method_params
    step = float(p.get("step", 0.01))
    max_iters = int(p.get("max_iters", 1000))
    rec_every = int(p.get("record_every", max(1, max_iters // 200)))
    X0 = trial_inits(cfg, model.dim, indices)
    out = euler_descent_batch(model, X0, step, max_iters,
                              critical_tol=float(p.get("critical_tol", DEFAULT_CRITICAL_TOL)),
                              divergence_guard=float(p.get("divergence_guard",
                                                           DEFAULT_DIVERGENCE_GUARD)),
                              record_every=rec_every, plateau_grad_tol=cfg.stuck_rule.grad_tol)
    rows = []
    for j, i in enumerate(indices):
        its = out.sample_iters[out.sample_iters <= out.iterations[j]]
        its, pos = np.unique(its, return_index=True)
        states = out.sample_states[pos, j, :]
        rec = TrajectoryRecord(times=its * step, states=states, values=model.value_batch(states),
                               step_norms=np.zeros(len(its)),
                               grad_norms=np.linalg.norm(model.gradient_batch(states), axis=1),
                               terminated_by=out.terminated_by[j], method="euler")
        rows.append(_row(cfg, i, X0[j], rec, float(out.final_values[j]),
                         float(out.final_grad_norms[j]), int(out.iterations[j]),
                         int(out.plateau_iters[j])))
    return rows


def _single(cfg, model, indices):
    p = cfg.method_params
    rows = []
    for i, x0 in zip(indices, trial_inits(cfg, model.dim, indices)):
        if cfg.method == "flow":
            rec = gradient_flow(model, x0, float(p.get("t_end", 10.0)),
                                rel_tol=float(p.get("rel_tol", 1e-9)),
                                abs_tol=p.get("abs_tol"), n_samples=int(p.get("n_samples", 201)),
                                divergence_guard=float(p.get("divergence_guard",
                                                             DEFAULT_DIVERGENCE_GUARD)))
        else:
            sched = ProxSchedule(tau=p.get("tau"), inner_tol=float(p.get("inner_tol", 1e-10)),
                                 inner_max_iters=int(p.get("inner_max_iters", 10_000)),
                                 outer_steps=int(p.get("outer_steps", 100)))
            rec = minimizing_movement(model, x0, sched).record
        plateau = _trailing_plateau(rec.grad_norms, cfg.stuck_rule.grad_tol)
        rows.append(_row(cfg, i, x0, rec, rec.final_value, float(rec.grad_norms[-1]),
                         len(rec) - 1, plateau))
    return rows


def _row(cfg, i, x0, rec, value, gnorm, iters, plateau):
    rule = cfg.stuck_rule
    row = {"trial": int(i), "x0": [float(v) for v in x0], "terminal_value": value,
           "terminal_grad_norm": gnorm, "iterations": iters, "plateau_iters": plateau,
           "terminated_by": rec.terminated_by,
           "stuck": bool(rule.in_band(value) and plateau >= rule.min_plateau_iters)}
    if "boundedness" in cfg.diagnostics:
        row["boundedness"] = classify_boundedness(rec).cls
    return row


def _run_chunk(cfg_dict, indices):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    model = make_model(cfg.model, **cfg.model_params)
    if cfg.method == "euler":
        return _euler_chunk(cfg, model, indices)
    return _single(cfg, model, indices)


def run_experiment(cfg: ExperimentConfig, workers=None, chunk_size=250) -> RunManifest:
    """Run ``cfg.trials`` independent trials and collect a manifest.

    Trial ``i`` draws its initial point from ``substream(cfg.seed, i)``.
    Fixed-step runs are vectorised over chunks of trials; chunks are spread
    over ``workers`` processes and reassembled in trial order, so the
    manifest does not depend on the worker count.
    """
    t0 = time.perf_counter()
    try:
        model = make_model(cfg.model, **cfg.model_params)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot build model {cfg.model!r}: {exc}") from exc
    if cfg.method == "flow" and model.smoothness != "smooth":
        raise ConfigError(f"{cfg.model} is not smooth; use method 'euler' or 'prox'")
    trial_inits(cfg, model.dim, range(min(cfg.trials, 1)))
    workers = cfg.workers if workers is None else int(workers)
    size = chunk_size if cfg.method == "euler" else max(1, min(chunk_size, 8))
    chunks = [list(range(s, min(s + size, cfg.trials))) for s in range(0, cfg.trials, size)]
    cfg_dict = cfg.to_dict()
    if workers <= 1 or len(chunks) == 1:
        parts = [_run_chunk(cfg_dict, c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [cfg_dict] * len(chunks), chunks))
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: r["trial"])
    n_stuck = sum(1 for r in rows if r["stuck"])
    echo = cfg.to_dict()
    echo["run"].pop("workers")
    return RunManifest(config=echo, trials=rows, stuck_fraction=n_stuck / cfg.trials,
                       version=__version__, wall_time=time.perf_counter() - t0)
