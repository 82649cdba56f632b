"""
Sweeping the logistic family
============================

Node counts along ``mu`` in [2.6, 3.55] follow the period-doubling cascade:
a new node appears each time the attractor doubles.  Every graph is a tower
and hence connected.
"""

import numpy as np

from streamlab import AnalysisConfig, bifurcation_sweep, logistic

mus = np.linspace(2.6, 3.55, 20)
reports, rows = bifurcation_sweep(mus, AnalysisConfig(logistic(3.0), 6, 12))
for row in rows:
    bar = "#" * (row.node_count or 0)
    print(f"mu={row.mu:.4f}  nodes={row.node_count}  tower={row.is_tower}  {bar}")
print("all towers:", all(r.is_tower for r in rows))
