"""Chain recurrence, stream graphs and Lyapunov functions from box covers."""
from .boxcover import Box, BoxCover, BoxId, full_cover, locate, subdivide
from .errors import *  # noqa: F401,F403
from .nonwandering import ChainQuery, NwGraph, collapse_loops, nw_graph
from .pipeline import (CHECKS, AnalysisConfig, AnalysisReport, CheckResult, analyze, bifurcation_sweep,
                       f_vs_f2, verify)
from .serialize import emit_dot, emit_json, load_config, parse_report
from .streamgraph import (StreamGraph, check_connected, downstream_set, is_tower, maximal_tower_through,
                          recurrent_components, sigma_cost, stream_graph, synthesize_lyapunov,
                          topological_levels, upstream_set)
from .systems import (SemiFlowSpec, analysis_region, circle_poles, evaluate, henon, logistic, lorenz,
                      orbit, sin_pi_flow, tent, trapping_region, unimodal_composite, verify_trapping)
from .transition import TransitionGraph, build_transition_graph

__version__ = "0.1.0"
