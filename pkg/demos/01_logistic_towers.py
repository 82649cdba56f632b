"""
Stream graphs of the logistic map
=================================

The logistic map ``x -> mu x (1 - x)`` has a tower as its stream graph for
every ``mu``: the nodes are totally ordered from the repelling fixed point at
0 down to the attractor.  This script builds the graph at three parameters
and prints each node with its hull and its Lyapunov value.
"""

from streamlab import AnalysisConfig, analyze, emit_dot, is_tower, logistic

# %%
# At mu = 2.5 there are two fixed points, 0 and p = 1 - 1/mu = 0.6.  Every
# other point converges to p, so the graph is the single edge 0 -> p.

for mu, depth in [(2.5, 12), (3.2, 14), (3.84, 14)]:
    report = analyze(AnalysisConfig(logistic(mu), depth_start=8, depth_max=depth))
    sg = report.stream
    print(f"mu = {mu}: {sg.node_count} nodes, tower = {is_tower(sg)}")
    for node, value in zip(sg.nodes, report.lyapunov.node_values):
        h = node.hull
        print(f"  node {node.id} ({node.classification:8s}) boxes={node.cardinality:5d} "
              f"hull=[{h.lo[0]:.5f}, {h.hi[0]:.5f}]  V={value:.2f}")
    print("  reduced edges:", sg.reduced_edges)

# %%
# At mu = 3.2 the fixed point p has turned repelling and sits between 0 and
# the attracting period-2 orbit {0.5130, 0.7995}.  At mu = 3.84, inside the
# period-3 window, the middle node is a Cantor-like saddle and the attractor
# is a 3-cycle.  The DOT drawing of the last graph uses circles, diamonds and
# squares for top, interior and bottom nodes.

print()
print(emit_dot(sg))
