"""
Bounded and unbounded gradient flows
====================================

Three smooth flows classified from their sampled trajectories.
"""

import numpy as np

from subtraj.diagnostics import check_sign_stability, classify_boundedness
from subtraj.flows import gradient_flow
from subtraj.models import make_model

# slow escape to infinity on a scalar function with a vanishing derivative
cex = make_model("cex-unbounded")
rec = gradient_flow(cex, [2.0], 50.0, rel_tol=1e-10)
g = cex.separation_potential
print("x(50) =", rec.states[-1, 0])
print("identity residual", np.max(np.abs(g(rec.states[:, 0]) - 2 * rec.times - g(2.0))))
print(classify_boundedness(rec))

# the sigmoid chain always settles down
chain = make_model("sigmoid-chain")
rec = gradient_flow(chain, [0.5, -1.0, 1.5], 200.0, rel_tol=1e-10, n_samples=2001)
print(classify_boundedness(rec))
print(check_sign_stability(rec, chain).verdict)

# below the saddle value the two-datum sigmoid loss runs off towards 0.5
two = make_model("sigmoid-two-data")
rec = gradient_flow(two, [1.0, 0.2], 200.0)
print("f(x(200)) =", rec.final_value, classify_boundedness(rec).cls)
