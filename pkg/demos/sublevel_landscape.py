"""
Sublevel sets on a window
=========================

Sampling the one-dimensional function with infinitely many critical values
and certifying a component of a sublevel set as a setwise local minimum.
"""

from subtraj.landscape import certify_setwise_min, sample_grid, sublevel_components
from subtraj.models import make_model

f = make_model("cex-infinite-critical")
field = sample_grid(f, [(0, 9)], 901)
lab = sublevel_components(field, -1.0)
print("components of [f <= -1]:", lab.component_count)

cid = lab.component_of((100,))
cert = certify_setwise_min(field, lab, cid, global_inf=f.known_infimum)
print("certified", cert.certified, "within window", cert.within_window)
print("component inf", cert.component_inf, "global inf", cert.global_inf)
print("spurious", cert.spurious)

# the oscillatory function gains components as the grid is refined
osc = make_model("oscillatory")
for n in (10 ** 3, 10 ** 4, 10 ** 5):
    print(n, sublevel_components(sample_grid(osc, [(-1, 1)], n), 0.0).component_count)
