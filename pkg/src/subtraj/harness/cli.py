"""Command-line interface.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from ..diagnostics import (check_balancedness_l1, check_balancedness_sensing,
                           check_frozen_block, check_l1_norm_bound, check_sign_stability,
                           classify_boundedness)
from ..errors import NumericError, SubtrajError
from ..flows import ProxSchedule, euler_descent, gradient_flow, minimizing_movement
from ..landscape import (enumerate_critical_mc, find_critical_numeric, sample_grid,
                         sublevel_components)
from ..models import make_model
from .config import load_config
from .figures import FIGURES, reproduce_figure
from .rng import substream
from .runner import run_experiment

CHECKS = ("boundedness", "balancedness-sensing", "balancedness-l1", "l1-norm-bound",
          "frozen-block", "sign-stability")


class _UsageError(SubtrajError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise _UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _bounds(text):
    out = []
    for part in text.split(","):
        try:
            lo, hi = part.split(":")
            out.append((float(lo), float(hi)))
        except ValueError:
            raise _UsageError(f"bounds must look like lo:hi,lo:hi; got {text!r}") from None
    return out


def _params(text):
    if not text:
        return {}
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _UsageError(f"--params must be a JSON object: {exc}") from None
    if not isinstance(d, dict):
        raise _UsageError("--params must be a JSON object")
    return d


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--out", default=None, help="output file or directory (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="json")


def build_parser():
    ap = _Parser(prog="subtraj", description="Subgradient-trajectory landscape toolkit")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="run an experiment from a TOML/JSON config")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    _common(p)

    def traj_args(p):
        p.add_argument("--model", required=True)
        p.add_argument("--params", default="", help="model parameters as JSON")
        p.add_argument("--x0", default=None, help="comma-separated start (default: U[-1,1])")
        p.add_argument("--method", choices=("euler", "flow", "prox"), default="euler")
        p.add_argument("--step", type=float, default=0.01)
        p.add_argument("--iters", type=int, default=1000)
        p.add_argument("--t-end", type=float, default=10.0)
        p.add_argument("--rel-tol", type=float, default=1e-9)
        p.add_argument("--samples", type=int, default=201)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--steps", type=int, default=100)
        p.add_argument("--inner-tol", type=float, default=1e-10)
        p.add_argument("--inner-max-iters", type=int, default=10_000)

    p = sub.add_parser("trajectory", help="integrate one trajectory")
    traj_args(p)
    _common(p)

    p = sub.add_parser("grid", help="sample a model on a grid")
    p.add_argument("--model", required=True)
    p.add_argument("--params", default="")
    p.add_argument("--bounds", required=True, help="lo:hi per free axis, comma separated")
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--fixed", default="", help="fixed coordinates as i=v,i=v")
    p.add_argument("--level", type=float, default=None, help="also label [f <= level]")
    p.add_argument("--binary", action="store_true", help="write the binary grid format")
    _common(p)

    p = sub.add_parser("critical", help="critical points")
    p.add_argument("--model", required=True)
    p.add_argument("--params", default="")
    p.add_argument("--t", type=float, action="append", default=None,
                   help="family parameter (completion example; repeatable)")
    p.add_argument("--n-seeds", type=int, default=20, help="random Newton seeds otherwise")
    p.add_argument("--box", type=float, default=1.0, help="seeds drawn from U[-box, box]")
    _common(p)

    p = sub.add_parser("diagnose", help="integrate and run one diagnostic")
    traj_args(p)
    p.add_argument("--check", choices=CHECKS, default="boundedness")
    _common(p)

    p = sub.add_parser("reproduce", help="write the data of one figure")
    p.add_argument("figure_id", choices=FIGURES)
    p.add_argument("--trials", type=int, default=10)
    _common(p)
    return ap


def _emit(text, out):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _dicts_csv(rows):
    buf = io.StringIO()
    keys = list(rows[0]) if rows else []
    import csv
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v
                    for k, v in r.items()})
    return buf.getvalue()


def _trajectory(args, model):
    if args.x0 is None:
        x0 = substream(args.seed, 0).uniform(-1, 1, model.dim)
    else:
        x0 = np.array(_floats(args.x0))
    if args.method == "euler":
        return euler_descent(model, x0, args.step, args.iters)
    if args.method == "flow":
        return gradient_flow(model, x0, args.t_end, rel_tol=args.rel_tol, n_samples=args.samples)
    sched = ProxSchedule(tau=args.tau, inner_tol=args.inner_tol,
                         inner_max_iters=args.inner_max_iters, outer_steps=args.steps)
    return minimizing_movement(model, x0, sched).record


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.seed:
        cfg = cfg.with_overrides(seed=args.seed)
    man = run_experiment(cfg, workers=args.workers)
    if args.format == "csv":
        text = _dicts_csv(man.trials)
    else:
        text = man.to_json()
    if args.out and Path(args.out).suffix == "":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"manifest.{args.format}").write_text(text)
        (out / "timing.json").write_text(json.dumps({"wall_time": man.wall_time}))
    else:
        _emit(text, args.out)
    return 0


def _cmd_trajectory(args):
    model = make_model(args.model, **_params(args.params))
    rec = _trajectory(args, model)
    if args.format == "csv":
        _emit(rec.to_csv(), args.out)
    else:
        _emit(json.dumps({"method": rec.method, "terminated_by": rec.terminated_by,
                          "times": rec.times.tolist(), "states": rec.states.tolist(),
                          "values": rec.values.tolist(), "grad_norms": rec.grad_norms.tolist(),
                          "step_norms": rec.step_norms.tolist()}, sort_keys=True), args.out)
    return 0


def _cmd_grid(args):
    model = make_model(args.model, **_params(args.params))
    fixed = {}
    for item in filter(None, args.fixed.split(",")):
        k, v = item.split("=")
        fixed[int(k)] = float(v)
    field = sample_grid(model, _bounds(args.bounds), args.resolution,
                        slice_spec={"fixed": fixed} if fixed else None)
    if args.binary:
        if args.out is None:
            raise _UsageError("--binary needs --out")
        Path(args.out).write_bytes(field.to_bytes())
    elif args.format == "csv" and args.level is None:
        _emit(field.to_csv(), args.out)
    else:
        d = {"bounds": field.bounds, "resolution": field.resolution,
             "min": float(field.values.min()), "max": float(field.values.max())}
        if args.level is not None:
            lab = sublevel_components(field, args.level)
            d.update(level=lab.level, component_count=lab.component_count,
                     touches_boundary=list(lab.touches_boundary))
        _emit(json.dumps(d, sort_keys=True), args.out)
    return 0


def _cmd_critical(args):
    model = make_model(args.model, **_params(args.params))
    if args.model == "matrix-completion-ex1":
        recs = enumerate_critical_mc(args.t or [1.0])
        failures = []
    else:
        rng = substream(args.seed, 0)
        seeds = rng.uniform(-args.box, args.box, (args.n_seeds, model.dim))
        res = find_critical_numeric(model, seeds)
        recs, failures = res.records, res.failures
    rows = [r.to_dict() for r in recs]
    if args.format == "csv":
        _emit(_dicts_csv(rows), args.out)
    else:
        _emit(json.dumps({"records": rows, "failures": failures}, sort_keys=True, indent=1),
              args.out)
    return 0


def _cmd_diagnose(args):
    model = make_model(args.model, **_params(args.params))
    rec = _trajectory(args, model)
    if args.check == "boundedness":
        d = classify_boundedness(rec).to_dict()
    else:
        fn = {"balancedness-sensing": check_balancedness_sensing,
              "balancedness-l1": check_balancedness_l1,
              "l1-norm-bound": check_l1_norm_bound,
              "frozen-block": check_frozen_block,
              "sign-stability": check_sign_stability}[args.check]
        d = fn(rec, model).to_dict()
    _emit(_dicts_csv([d]) if args.format == "csv" else json.dumps(d, sort_keys=True), args.out)
    return 0


def _cmd_reproduce(args):
    out = args.out or f"./{args.figure_id}"
    for p in reproduce_figure(args.figure_id, out, seed=args.seed, trials=args.trials):
        print(p)
    return 0


COMMANDS = {"run": _cmd_run, "trajectory": _cmd_trajectory, "grid": _cmd_grid,
            "critical": _cmd_critical, "diagnose": _cmd_diagnose, "reproduce": _cmd_reproduce}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (SubtrajError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
