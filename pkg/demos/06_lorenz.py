"""
The Lorenz system
=================

A three-dimensional smoke test: the time-one map of the Lorenz flow at the
classical parameters on a trapping box derived from the quadratic Lyapunov
function ``r x^2 + s y^2 + s (z - 2 r)^2``.  The padded outer approximation is
too large at depth 7, so the transition graph is built from sampled images.
Takes about half a minute.
"""

import time

from streamlab import AnalysisConfig, analyze, lorenz, trapping_region

system = lorenz()
box = trapping_region(system)
print("trapping box:", [f"[{a:.1f}, {b:.1f}]" for a, b in zip(box.lo, box.hi)])

t0 = time.perf_counter()
report = analyze(AnalysisConfig(system, 3, 7, mode="sampled", checks=("acyclic", "connected")))
for entry in report.depths:
    print(f"depth {entry.depth}: {entry.box_count:7d} boxes, {entry.stream.node_count} nodes")
for node in report.stream.nodes:
    print(f"node {node.id}: {node.cardinality} boxes, hull {node.hull.lo} .. {node.hull.hi}")
print({k: v.passed for k, v in report.checks.items()}, f"{time.perf_counter() - t0:.1f} s")
