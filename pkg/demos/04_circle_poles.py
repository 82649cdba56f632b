"""
Two poles on a circle
=====================

A flow on the circle with two rest points N and S, both semi-stable: every
other point moves the same way round.  The orbit from just past N ends at S
and the orbit from just past S ends at N, so the non-wandering graph is a
2-cycle.  Chain recurrence sees one node, the whole circle.
"""

from streamlab import AnalysisConfig, analyze, circle_poles, emit_dot

report = analyze(AnalysisConfig(circle_poles(), 6, 10, nw_schedule=(1e-1, 3e-2, 1e-2)))
sg = report.stream
node = sg.nodes[0]
print(f"chains: {sg.node_count} node with {node.cardinality} of {report.graph.cover.cells_per_axis} boxes")

nw = report.nw
for i, pts in enumerate(nw.nodes):
    print(f"NW node {i}: {nw.kinds[i]} near {pts.mean():.4f}")
print("NW edges:", nw.edges)
print(f"collapsed: {report.collapsed.node_count} node")
print(emit_dot(nw, name="circle"))
