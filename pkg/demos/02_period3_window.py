"""
Loops in the non-wandering graph
================================

Chain recurrence and the non-wandering relation disagree at the right end of
the period-3 window.  There the attractor touches the repelling Cantor set,
so orbits leave the Cantor set for the attractor and an arbitrarily small
jump brings them back.  The non-wandering graph gets a 2-cycle, while chain
recurrence merges the two pieces into a single node.

The crisis value is where the fifth iterate of the critical point lands on
the smallest point of the unstable 3-cycle.
"""

import numpy as np
from scipy.optimize import brentq

from streamlab import AnalysisConfig, analyze, emit_dot, logistic
from streamlab.systems import critical_orbit, periodic_orbits

# %%
# Locate the crisis by root finding.


def gap(mu):
    unstable = max((o for o in periodic_orbits(logistic(mu), 0.0, 1.0, max_period=3) if o[0] == 3),
                   key=lambda o: abs(o[2]))
    return critical_orbit(mu, 5) - unstable[1][0]


mu_r = brentq(gap, 3.856, 3.8575, xtol=1e-13)
print(f"crisis at mu = {mu_r:.10f}")

# %%
# Chains stream graph and non-wandering graph at the crisis.

report = analyze(AnalysisConfig(logistic(mu_r), 8, 14, nw_schedule=(1e-1, 3e-2, 1e-2)))
nw = report.nw
print(f"chains: {report.stream.node_count} nodes, edges {report.stream.edges}")
for i, (kind, pts) in enumerate(zip(nw.kinds, nw.nodes)):
    print(f"NW node {i}: {kind:9s} {len(pts):3d} points in [{np.min(pts):.4f}, {np.max(pts):.4f}]")
print("NW edges:", nw.edges, " 2-cycles:", nw.two_cycles())
print(f"after collapsing loops: {report.collapsed.node_count} nodes")

# %%
# The NW drawing keeps both arrows of the loop.

print(emit_dot(nw, name="nw"))
