"""Acceptance suite: one printed pass/fail line per check.

Two checks are known to be unattainable as stated and are marked strict
xfail: the literal stuck band around value 2 (stuck trials settle near 1,
the value of the spurious minimum at infinity), and ``||x(50)|| > 5`` for the
unbounded one-dimensional example (the exact solution reaches about 4.26).
Both are still executed and reported as FAIL lines.
"""
import json
import time

import numpy as np
import pytest

from acceptance_log import report
from subtraj.diagnostics import (BOUNDED, DIVERGING, PASS, check_balancedness_l1,
                                 check_balancedness_sensing, check_frozen_block,
                                 check_l1_norm_bound, check_sign_stability,
                                 classify_boundedness)
from subtraj.flows import (CRITICAL, ProxSchedule, gradient_flow, holder_estimate,
                           minimizing_movement)
from subtraj.harness import cli
from subtraj.harness.config import StuckRule
from subtraj.harness.figures import fig1_config
from subtraj.harness.runner import run_experiment
from subtraj.landscape import (certify_setwise_min, find_critical_numeric, sample_grid,
                               sublevel_components)
from subtraj.models import REGISTRY, make_model

FIG1_SEED = 42
FIG1_TRIALS = 1000


# --- 1 -----------------------------------------------------------------------

def test_c1_completion_critical_structure(capsys):
    t0 = time.perf_counter()
    code = cli.main(["critical", "--model", "matrix-completion-ex1",
                     "--t", "-2", "--t", "0.5", "--t", "1", "--t", "3"])
    elapsed = time.perf_counter() - t0
    recs = json.loads(capsys.readouterr().out)["records"]
    expect = {"C1": 0.0, "C2": 2.0, "C3": 2.0, "C4": 3.0}
    fams = {r["family"][:2] for r in recs}
    val_err = max(abs(r["value"] - expect[r["family"][:2]]) for r in recs)
    grad = max(r["grad_norm"] for r in recs)
    saddles = all(r["classification"] == "strict_saddle" and r["eig_min"] < -1e-6
                  and r["eig_max"] > 1e-6 for r in recs if r["family"][:2] != "C1")
    ok = (code == 0 and fams == set(expect) and val_err <= 1e-10 and grad <= 1e-12
          and saddles and elapsed < 1.0)
    with capsys.disabled():
        report(1, ok, f"value err {val_err:.1e} <= 1e-10, grad {grad:.1e} <= 1e-12, "
                      f"C2/C3/C4 strict saddles {saddles}, {elapsed:.2f}s < 1s")
    assert ok


# --- 2 and 11 -----------------------------------------------------------------

@pytest.fixture(scope="module")
def fig1_run():
    cfg = fig1_config(seed=FIG1_SEED, trials=FIG1_TRIALS)
    t0 = time.perf_counter()
    man = run_experiment(cfg)
    return cfg, man, time.perf_counter() - t0


def test_c2_stuck_fraction(fig1_run, capsys):
    cfg, man, elapsed = fig1_run
    frac = man.stuck_fraction
    ok_succ = all(t["terminal_value"] <= 1e-4 for t in man.trials
                  if not t["stuck"] and t["terminated_by"] == CRITICAL)
    ok = 0.05 <= frac <= 0.60 and ok_succ and elapsed < 120
    with capsys.disabled():
        report(2, ok, f"stuck fraction {frac:.3f} in [0.05, 0.60] (band 1 +- 0.2, "
                      f"plateau >= 500 iters below grad 1e-2); successes <= 1e-4: {ok_succ}; "
                      f"{elapsed:.1f}s < 120s")
    assert ok


@pytest.mark.xfail(strict=True, reason="stuck trials plateau near 1, not 2")
def test_c2_literal_band_near_two(fig1_run, capsys):
    cfg, _, _ = fig1_run
    literal = cfg.with_overrides(stuck_rule=StuckRule(center=2.0, half_width=0.2,
                                                      min_plateau_iters=500, grad_tol=1e-3))
    frac = run_experiment(literal).stuck_fraction
    ok = 0.05 <= frac <= 0.60
    with capsys.disabled():
        report(2, ok, f"literal band 2 +- 0.2, grad < 1e-3: stuck fraction {frac:.3f} "
                      "in [0.05, 0.60]")
    assert ok


def test_c11_manifest_bytes_reproduce(fig1_run, capsys):
    cfg, man, _ = fig1_run
    again = run_experiment(cfg)
    ok = again.to_json().encode() == man.to_json().encode()
    with capsys.disabled():
        report(11, ok, f"repeated run manifest byte-identical ({len(man.to_json())} bytes)")
    assert ok


# --- 3 -----------------------------------------------------------------------

def test_c3_sensing_conservation(capsys):
    m = make_model("matrix-sensing", seed=0, m=20, n1=3, n2=3, rank=1)
    x0 = np.random.default_rng(0).standard_normal(m.dim)
    loose = check_balancedness_sensing(gradient_flow(m, x0, 10.0, rel_tol=1e-9), m)
    tight = check_balancedness_sensing(gradient_flow(m, x0, 10.0, rel_tol=1e-12), m)
    ratio = loose.max_drift / max(tight.max_drift, 1e-300)
    ok = loose.max_drift <= 1e-5 and ratio >= 10
    with capsys.disabled():
        report(3, ok, f"drift {loose.max_drift:.2e} <= 1e-5 at 1e-9; "
                      f"{tight.max_drift:.2e} at 1e-12 (x{ratio:.0f} >= 10)")
    assert ok


# --- 4 -----------------------------------------------------------------------

def test_c4_l1_bound_and_drift(capsys):
    tau = 0.01
    ok, worst_excess, worst_drift = True, -np.inf, 0.0
    for seed in (0, 1, 2):
        m = make_model("l1-factorization", seed=seed)
        u = np.random.default_rng(seed).standard_normal((m.m, m.r))
        x0 = m.flatten([u, u.copy()])
        res = minimizing_movement(m, x0, ProxSchedule(tau=tau, outer_steps=2000))
        nb = check_l1_norm_bound(res.record, m)
        dr = check_balancedness_l1(res.record, m)
        worst_excess = max(worst_excess, nb.max_drift)
        worst_drift = max(worst_drift, dr.max_drift)
        ok &= nb.verdict == PASS and dr.verdict == PASS
    with capsys.disabled():
        report(4, ok, f"norm bound excess {worst_excess:.3g} <= 0, "
                      f"phi drift {worst_drift:.2e} <= 5 tau = {5 * tau:.2e}")
    assert ok


# --- 5 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def cex_run():
    m = make_model("cex-unbounded")
    return m, gradient_flow(m, [2.0], 50.0, rel_tol=1e-10, n_samples=501)


def test_c5_unbounded_oracle(cex_run, capsys):
    m, rec = cex_run
    g = m.separation_potential
    err = float(np.max(np.abs(g(rec.states[:, 0]) - 2 * rec.times - g(2.0))))
    monotone = bool(np.all(np.diff(rec.states[:, 0]) > 0))
    cls = classify_boundedness(rec).cls
    ok = err <= 1e-3 and monotone and cls == DIVERGING
    with capsys.disabled():
        report(5, ok, f"g(x(t)) - 2t - g(2) within {err:.1e} <= 1e-3, monotone {monotone}, "
                      f"classified {cls}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the exact solution has x(50) ~ 4.26 < 5")
def test_c5_norm_exceeds_five(cex_run, capsys):
    _, rec = cex_run
    xn = float(np.abs(rec.states[-1, 0]))
    ok = xn > 5
    with capsys.disabled():
        report(5, ok, f"||x(50)|| = {xn:.4f} > 5")
    assert ok


# --- 6 -----------------------------------------------------------------------

def test_c6_sigmoid_chain(capsys):
    m = make_model("sigmoid-chain", L=3, x=1.0, y=0.8)
    rng = np.random.default_rng(6)
    classes, verdicts, worst = [], [], 0.0
    for _ in range(20):
        rec = gradient_flow(m, rng.uniform(-2, 2, m.dim), 200.0, rel_tol=1e-10,
                            n_samples=2001)
        classes.append(classify_boundedness(rec).cls)
        rep = check_sign_stability(rec, m)
        verdicts.append(rep.verdict)
        # independent monotonicity check of w_{L-1} - w_L^2 / 2 after T
        t_stab = rep.witness["stabilization_time"] if rep.witness else 0.0
        k0 = int(np.searchsorted(rec.times, t_stab))
        h = rec.states[k0:, -2] - 0.5 * rec.states[k0:, -1] ** 2
        s = np.diff(h) / np.diff(rec.times[k0:])
        worst = max(worst, min(float(np.max(s, initial=0)), float(np.max(-s, initial=0))))
    ok = (all(c == BOUNDED for c in classes) and all(v == PASS for v in verdicts)
          and worst <= 1e-8)
    with capsys.disabled():
        report(6, ok, f"{classes.count(BOUNDED)}/20 bounded, "
                      f"{verdicts.count(PASS)}/20 sign-stable, monotonicity slack {worst:.1e}")
    assert ok


# --- 7 -----------------------------------------------------------------------

def test_c7_sigmoid_two_data(capsys):
    m = make_model("sigmoid-two-data")
    rng = np.random.default_rng(7)
    res = find_critical_numeric(m, rng.uniform(-3, 3, (50, 2)))
    one = (len(res.records) == 1 and np.linalg.norm(res.records[0].point) <= 1e-6
           and abs(res.records[0].value - 1) <= 1e-8)
    finals, classes = [], []
    while len(finals) < 20:
        x0 = rng.uniform(-3, 3, 2)
        if m.value(x0) >= 1:
            continue
        rec = gradient_flow(m, x0, 200.0, n_samples=2001)
        finals.append(rec.final_value)
        classes.append(classify_boundedness(rec).cls)
    near = max(abs(v - 0.5) for v in finals)
    ok = one and all(c == DIVERGING for c in classes) and near <= 0.05
    with capsys.disabled():
        report(7, ok, f"{len(res.records)} critical point(s), value "
                      f"{res.records[0].value if res.records else float('nan'):.10f}; "
                      f"{classes.count(DIVERGING)}/20 diverging, |f - 0.5| <= {near:.4f}")
    assert ok


# --- 8 -----------------------------------------------------------------------

def test_c8_scheme_estimates(capsys):
    q = make_model("quadratic", dim=1)
    res = minimizing_movement(q, [1.0], ProxSchedule(tau=0.5, outer_steps=30))
    rec_err = float(np.max(np.abs(res.knots[:, 0] - (2 / 3) ** np.arange(31))))
    energy_ok, holder_ok, runs = True, True, 0
    for name in REGISTRY:
        m = make_model(name)
        if m.known_infimum is None and m.lower_bound is None:
            continue
        for seed in range(3):
            x0 = np.random.default_rng(seed).uniform(-2, 2, m.dim)
            if name == "cex-unbounded":
                x0 = np.abs(x0) + 0.5
            r = minimizing_movement(m, x0, ProxSchedule(outer_steps=50))
            C = r.energy_bound
            energy_ok &= r.energy <= C + 1e-9
            h = holder_estimate(r, C)
            holder_ok &= h.max_ratio <= np.sqrt(2 * C) + 1e-12
            runs += 1
    ok = rec_err <= 1e-12 and energy_ok and holder_ok
    with capsys.disabled():
        report(8, ok, f"(2/3)^k error {rec_err:.1e} <= 1e-12; energy bound {energy_ok} and "
                      f"Holder <= sqrt(2C) {holder_ok} on {runs} zoo runs")
    assert ok


# --- 9 -----------------------------------------------------------------------

def test_c9_frozen_block(capsys):
    m = make_model("linear-nn", dims=(3, 3, 2), zero_columns=(1,))
    x0 = np.random.default_rng(9).standard_normal(m.dim)
    rep = check_frozen_block(gradient_flow(m, x0, 10.0), m)
    ok = rep.verdict == PASS and rep.max_drift <= 1e-6
    with capsys.disabled():
        report(9, ok, f"frozen-block drift {rep.max_drift:.2e} <= 1e-6")
    assert ok


# --- 10 ----------------------------------------------------------------------

def _flood(mask):
    lab = -np.ones(mask.shape, dtype=int)
    n = 0
    for i, j in zip(*np.nonzero(mask)):
        if lab[i, j] >= 0:
            continue
        lab[i, j], stack = n, [(i, j)]
        while stack:
            a, b = stack.pop()
            for da in (-1, 0, 1):
                for db in (-1, 0, 1):
                    u, v = a + da, b + db
                    if 0 <= u < 12 and 0 <= v < 12 and mask[u, v] and lab[u, v] < 0:
                        lab[u, v] = n
                        stack.append((u, v))
        n += 1
    return lab, n


def test_c10_landscape(capsys):
    rng = np.random.default_rng(10)
    exact = 0
    for _ in range(50):
        vals = rng.standard_normal((12, 12))
        field = sample_grid(make_model("constant", dim=2), [(0, 1), (0, 1)], 12)
        field = type(field)(field.bounds, field.resolution, vals, field.connectivity,
                            field.axes, field.base)
        lab = sublevel_components(field, 0.0)
        ref, n = _flood(vals <= 0.0)
        exact += int(lab.component_count == n and np.array_equal(lab.labels, ref))
    osc = make_model("oscillatory")
    counts = [sublevel_components(sample_grid(osc, [(-1, 1)], n), 0.0).component_count
              for n in (10 ** 3, 10 ** 4, 10 ** 5)]
    c = make_model("cex-infinite-critical")
    f = sample_grid(c, [(0, 9)], 901)
    lab = sublevel_components(f, -1.0)
    cid = lab.component_of((100,))
    idx = np.nonzero(lab.labels == cid)[0]
    span = (float(f.coords[0][idx[0]]), float(f.coords[0][idx[-1]]))
    cert = certify_setwise_min(f, lab, cid, global_inf=c.known_infimum)
    ok = (exact == 50 and counts[0] < counts[1] < counts[2] and span == (1.0, 9.0)
          and cert.certified and cert.within_window and cert.component_inf > -8
          and cert.spurious)
    with capsys.disabled():
        report(10, ok, f"flood fill {exact}/50 exact; counts {counts} increasing; "
                       f"window {span} certified {cert.certified}, inf "
                       f"{cert.component_inf:.4f} > -8, spurious {cert.spurious}")
    assert ok
