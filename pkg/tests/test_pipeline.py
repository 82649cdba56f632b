from dataclasses import replace

import pytest

from streamlab import errors
from streamlab.boxcover import Box
from streamlab.pipeline import (
    CHECKS, AnalysisConfig, AnalysisReport, analyze, bifurcation_sweep, check_acyclic, check_lyapunov_valid,
    f_vs_f2, refinement_nesting_check, verify,
)
from streamlab.serialize import emit_json
from streamlab.streamgraph import StreamGraph, is_tower
from streamlab.systems import logistic


def _near(hull, x, w):
    """Distance from ``x`` to the hull is at most ``w``."""
    return hull.lo[0] - w <= x <= hull.hi[0] + w


def test_logistic_25_final_report(report_25):
    sg = report_25.stream
    w = report_25.graph.cover.cell_width[0]
    assert sg.node_count == 2 and sg.edges == [(0, 1)]
    assert _near(sg.nodes[0].hull, 0.0, 2 * w)
    assert _near(sg.nodes[1].hull, 0.6, 2 * w)
    assert report_25.passed


def test_logistic_384_tower():
    sg = analyze(AnalysisConfig(logistic(3.84), 8, 14)).stream
    assert sg.node_count == 3 and is_tower(sg)
    assert sg.classes() == ["top", "interior", "bottom"]


def test_sin_pi_report(report_sinpi):
    sg = report_sinpi.stream
    assert sg.node_count == 2 and sg.edges == [(0, 1)]
    # the top node sits at 1, the bottom node at 0
    assert sg.nodes[0].hull.hi[0] == 1.0 and sg.nodes[1].hull.lo[0] == 0.0


def test_node_count_stable_over_last_depths(report_25, report_32, report_sinpi):
    for rep in (report_25, report_32, report_sinpi):
        assert rep.depths[-1].stream.node_count == rep.depths[-2].stream.node_count


def test_hull_diameters_shrink(report_25, report_32):
    for rep in (report_25, report_32):
        for a, b in zip(rep.depths, rep.depths[1:]):
            if a.stream.node_count != b.stream.node_count:
                continue
            w = rep.graph.cover.root.width[0] / (1 << a.depth)
            for na, nb in zip(a.stream.nodes, b.stream.nodes):
                assert nb.hull.diameter <= na.hull.diameter + w


def test_nesting(report_25):
    assert refinement_nesting_check(report_25)
    single = AnalysisReport(report_25.config, report_25.depths[-1:], report_25.stream)
    assert refinement_nesting_check(single)
    sampled = AnalysisReport(replace(report_25.config, mode="sampled"), report_25.depths, report_25.stream)
    with pytest.raises(errors.ModeUnsupported):
        refinement_nesting_check(sampled)


def test_full_suite_logistic_25(report_25):
    res = verify(report_25, CHECKS)
    failing = {k: v for k, v in res.items() if not v.passed}
    assert set(failing) <= {"f-vs-f2"}, failing


def test_injected_cycle_detected():
    sg = StreamGraph([], [(0, 1), (1, 2), (2, 0)], [])
    res = check_acyclic(sg)
    assert not res.passed and res.witness[0] == res.witness[-1]


def test_missing_lyapunov(report_25):
    bare = AnalysisReport(report_25.config, report_25.depths, report_25.stream, graph=report_25.graph)
    res = verify(bare, ["lyapunov-valid"])["lyapunov-valid"]
    assert res.missing and not res.passed
    with pytest.raises(errors.MissingArtifact):
        check_lyapunov_valid(bare)


def test_f_vs_f2_shape(report_25):
    res = f_vs_f2(report_25.graph)
    assert res["f"].shape == res["f2"].shape == (report_25.graph.n,)
    assert res["layer"] >= 0


def test_trapping_violation_raised():
    bad = logistic(3.5, region=Box((0.5,), (0.6,)))
    with pytest.raises(errors.TrappingViolation):
        analyze(AnalysisConfig(bad, 4, 5))


def test_config_validation():
    with pytest.raises(errors.ConfigurationError):
        AnalysisConfig(logistic(2.5), 8, 6)
    with pytest.raises(errors.ConfigurationError):
        AnalysisConfig(logistic(2.5), epsilon_rule="fixed")
    with pytest.raises(errors.ConfigurationError):
        AnalysisConfig(logistic(2.5), checks=("nope",))


def test_sweep_small():
    reports, rows = bifurcation_sweep([3.5, 2.5, 3.2], AnalysisConfig(logistic(2.5), 6, 12))
    assert [r.mu for r in rows] == [2.5, 3.2, 3.5]
    assert [r.node_count for r in rows][:2] == [2, 3] and rows[2].node_count >= 3
    assert all(r.is_tower for r in rows)
    assert bifurcation_sweep([], AnalysisConfig(logistic(2.5))) == ([], [])
    with pytest.raises(errors.ConfigurationError):
        bifurcation_sweep([4.5], AnalysisConfig(logistic(2.5)))


def test_sweep_deterministic():
    cfg = AnalysisConfig(logistic(2.5), 6, 10)
    a, _ = bifurcation_sweep([2.8, 3.1], cfg)
    b, _ = bifurcation_sweep([2.8, 3.1], cfg)
    assert [emit_json(r) for r in a] == [emit_json(r) for r in b]
