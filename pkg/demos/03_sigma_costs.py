"""
Sigma costs along a gradient-like flow
======================================

The time-one map of ``x' = -sin(pi x)`` on [0, 1] pushes every point towards
0.  Going downhill costs nothing, but climbing from 0.01 to 0.99 needs jumps
whose lengths add up to about the distance travelled.  The Σ-cost is the
least total jump length over mixed step/jump paths.
"""

from streamlab import AnalysisConfig, analyze, locate, sigma_cost, sin_pi_flow
from streamlab.pipeline import check_sigma_triangle

report = analyze(AnalysisConfig(sin_pi_flow(), 5, 10))
g = report.graph
w = g.cover.cell_width[0]
print(f"{report.stream.node_count} nodes, edges {report.stream.edges}, box width {w:.5f}")

# %%
# Uphill costs grow with the distance climbed; downhill costs stay within a
# couple of box widths of zero.

for a, b in [(0.01, 0.99), (0.01, 0.5), (0.3, 0.6), (0.9, 0.1), (0.6, 0.3)]:
    c = sigma_cost(g, locate(g.cover, a), locate(g.cover, b))
    print(f"sigma({a:.2f} -> {b:.2f}) = {c:.4f}   (distance {abs(b - a):.2f}, {c / w:.1f} boxes)")

# %%
# The costs satisfy the triangle inequality on random triples.

print("triangle inequality on 200 triples:", check_sigma_triangle(report, triples=200).passed)
