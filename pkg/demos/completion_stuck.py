"""
Descent on the 2x2 completion example
=====================================

Fixed-step descent from random starts either reaches a global minimum or
drifts off along a valley whose value creeps down towards 1.
"""

import numpy as np

from subtraj.harness.figures import fig1_config
from subtraj.harness.runner import run_experiment
from subtraj.landscape import enumerate_critical_mc
from subtraj.models import make_model

# the closed-form critical families and their Hessian types
for rec in enumerate_critical_mc([1.0]):
    print(f"{rec.family:10s} f = {rec.value:.1f}  {rec.classification}")

# 200 seeded trials, 50 000 steps of size 0.01
man = run_experiment(fig1_config(seed=42, trials=200))
vals = np.array([t["terminal_value"] for t in man.trials])
print("stuck fraction", man.stuck_fraction)
print("terminal values of stuck trials", np.unique(vals[vals > 0.5].round(3)))

# a stuck trial has a growing norm: it is walking out to infinity
stuck = [t for t in man.trials if t["stuck"]]
if stuck:
    mc = make_model("matrix-completion-ex1")
    x0 = np.array(stuck[0]["x0"])
    print("start", x0.round(3), "f =", round(mc.value(x0), 3))
