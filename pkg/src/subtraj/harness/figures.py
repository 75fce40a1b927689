"""Data behind the four reference figures (no plotting)."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..flows import euler_descent_batch
from ..landscape.grid import sample_grid
from ..models import make_model
from .config import ExperimentConfig, StuckRule
from .runner import run_experiment, trial_inits

FIGURES = ("fig1", "fig2", "fig3", "fig4")

FIG1_ITERS = 50_000
FIG1_STEP = 0.01
FIG1_TRIALS = 10
FIG1_EVERY = 100


def fig1_config(seed=0, trials=FIG1_TRIALS, max_iters=FIG1_ITERS) -> ExperimentConfig:
    """Fixed-step descent on the 2x2 completion example from U[-1, 1]^4."""
    return ExperimentConfig(model="matrix-completion-ex1", method="euler",
                            method_params={"step": FIG1_STEP, "max_iters": max_iters,
                                           "record_every": FIG1_EVERY},
                            trials=trials, seed=seed,
                            init={"kind": "uniform", "low": -1.0, "high": 1.0},
                            stuck_rule=StuckRule())


def _write(path, text):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _grid_files(field, out, stem):
    p_csv = _write(out / f"{stem}_grid.csv", field.to_csv())
    p_bin = out / f"{stem}_grid.bin"
    try:
        p_bin.write_bytes(field.to_bytes())
    except OSError as exc:
        raise OSError(f"cannot write {p_bin}: {exc}") from exc
    return [p_csv, p_bin]


def reproduce_figure(figure_id, out_dir, seed=0, trials=FIG1_TRIALS):
    """Write the data files of one figure into ``out_dir``; return their paths.

    * fig1: manifest JSON plus ``fig1_values.csv`` with one column of f per
      trial, sampled every 100 iterations of 50 000 at step 0.01;
    * fig2: ReLU toy on [-3, 3]^2 at 101 x 101 nodes;
    * fig3: the two-datum sigmoid loss with offset 3 on [-10, 10]^2 at 201 x 201;
    * fig4: the infinitely-many-critical-values function on [-7, 7], step 0.01.
    """
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure {figure_id!r}; choose from {FIGURES}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    if figure_id == "fig1":
        cfg = fig1_config(seed, trials)
        man = run_experiment(cfg)
        model = make_model(cfg.model)
        X0 = trial_inits(cfg, model.dim, range(trials))
        res = euler_descent_batch(model, X0, FIG1_STEP, FIG1_ITERS, record_every=FIG1_EVERY)
        vals = np.array([model.value_batch(S) for S in res.sample_states])
        p_csv = out / "fig1_values.csv"
        try:
            with p_csv.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["iteration"] + [f"trial_{i}" for i in range(trials)])
                for it, row in zip(res.sample_iters, vals):
                    w.writerow([int(it)] + [repr(float(v)) for v in row])
        except OSError as exc:
            raise OSError(f"cannot write {p_csv}: {exc}") from exc
        p_man = _write(out / "fig1_manifest.json", man.to_json())
        return [p_man, p_csv]
    if figure_id == "fig2":
        field = sample_grid(make_model("relu-toy"), [(-3, 3), (-3, 3)], 101)
        return _grid_files(field, out, "fig2")
    if figure_id == "fig3":
        field = sample_grid(make_model("sigmoid-fig3"), [(-10, 10), (-10, 10)], 201)
        return _grid_files(field, out, "fig3")
    field = sample_grid(make_model("cex-infinite-critical"), [(-7, 7)], 1401)
    files = _grid_files(field, out, "fig4")
    meta = {"critical_points": {"-4": -8.0, **{str(2 * k): -3 * (1 - 2.0 ** -k)
                                                for k in range(4)}}}
    files.append(_write(out / "fig4_meta.json", json.dumps(meta, sort_keys=True)))
    return files
