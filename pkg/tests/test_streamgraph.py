import numpy as np
import pytest

from streamlab import errors
from streamlab.boxcover import Box, BoxCover, full_cover, locate
from streamlab.streamgraph import (
    check_connected, check_lyapunov, condense, downstream_set,
    is_tower, maximal_tower_through, recurrent_components, sigma_cost, stream_graph,
    stream_graph_from_edges, synthesize_lyapunov, topological_levels, transitive_reduction, upstream_set,
)
from streamlab.systems import logistic, sin_pi_flow
from streamlab.transition import Adjacency, TransitionGraph, build_jump_edges, build_transition_graph

from conftest import PERIOD2_32


def _toy(step_pairs, codes=(0, 4, 8, 12)):
    """Isolated boxes (no touching neighbours) so only the given steps matter."""
    cover = BoxCover(Box((0.0,), (1.0,)), 4, np.array(codes[: 1 + max(max(p) for p in step_pairs)]))
    src, dst = zip(*step_pairs)
    step = Adjacency.from_pairs(len(cover), src, dst)
    return TransitionGraph(cover, step, build_jump_edges(cover, 0.0), 0.0)


def _analyze_graph(graph):
    part = recurrent_components(graph)
    dag = condense(graph, part)
    return part, dag, stream_graph(dag, part)


def test_three_cycle_is_one_node():
    part = recurrent_components(_toy([(0, 1), (1, 2), (2, 0)]))
    assert len(part.nodes) == 1 and len(part.nodes[0]) == 3


def test_chain_without_cycles_has_no_nodes():
    part = recurrent_components(_toy([(0, 1), (1, 2), (2, 2)]))
    assert len(part.nodes) == 1 and list(part.nodes[0]) == [2]
    part = recurrent_components(_toy([(0, 1), (1, 2)]))
    assert part.nodes == []


def test_partition_covers_active_set():
    g = build_transition_graph(logistic(3.2), full_cover(Box((0.0,), (0.8,)), 10), 0.8 / 1024)
    part = recurrent_components(g)
    seen = np.concatenate(part.nodes + [part.transient])
    assert sorted(seen) == list(range(g.n))


def test_logistic_25_two_nodes():
    cover = full_cover(Box((0.0,), (0.7,)), 8)
    g = build_transition_graph(logistic(2.5), cover, cover.cell_diameter)
    part, dag, sg = _analyze_graph(g)
    assert sg.node_count == 2
    assert sg.edges == [(0, 1)]
    assert sg.nodes[0].hull.lo[0] == 0.0
    assert abs(sg.nodes[1].hull.center[0] - 0.6) < 2 * cover.cell_width[0]
    assert sg.classes() == ["top", "bottom"]


def test_logistic_32_tower(report_32):
    sg = report_32.stream
    assert sg.node_count == 3 and is_tower(sg)
    assert sg.reduced_edges == [(0, 1), (1, 2)]
    w = report_32.graph.cover.cell_width[0]
    h = sg.nodes[2].hull
    assert h.lo[0] - 2 * w <= PERIOD2_32[0] and PERIOD2_32[1] <= h.hi[0] + 2 * w


def test_single_component_no_edges():
    cover = BoxCover(Box((0.0,), (1.0,)), 2, np.arange(4))
    step = Adjacency.from_pairs(4, [0, 1, 2, 3], [1, 2, 3, 0])
    g = TransitionGraph(cover, step, build_jump_edges(cover, 0.0), 0.0)
    _, _, sg = _analyze_graph(g)
    assert sg.node_count == 1 and sg.edges == [] and sg.classes() == ["isolated"]


def test_transient_only_partition():
    g = _toy([(0, 1), (1, 2)])
    part, dag, sg = _analyze_graph(g)
    # every box and every landing vertex is its own component
    assert sg.node_count == 0 and dag.ncomp == 2 * g.n
    assert len(set(dag.box_labels)) == g.n


def test_reduction_examples():
    sg = stream_graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert transitive_reduction(sg) == [(0, 1), (1, 2)]
    tower4 = stream_graph_from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    assert len(tower4.edges) == 6 and tower4.reduced_edges == [(0, 1), (1, 2), (2, 3)]
    assert stream_graph_from_edges(2, []).reduced_edges == []


def test_cyclic_edges_rejected():
    with pytest.raises(errors.CycleDetected) as exc:
        stream_graph_from_edges(3, [(0, 1), (1, 2), (2, 0)])
    assert exc.value.cycle[0] == exc.value.cycle[-1]


def test_tower_examples():
    assert not is_tower(stream_graph_from_edges(3, [(0, 1), (0, 2)]))
    assert is_tower(stream_graph_from_edges(1, []))


def test_connected_examples():
    res = check_connected(stream_graph_from_edges(2, []))
    assert not res.ok and res.witness == ([0], [1])
    assert check_connected(stream_graph_from_edges(1, [])).ok


def test_maximal_tower_examples():
    tower = stream_graph_from_edges(3, [(0, 1), (1, 2)])
    assert maximal_tower_through(tower, 1) == [0, 1, 2]
    diamond = stream_graph_from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    assert maximal_tower_through(diamond, 1) == [0, 1, 3]
    assert maximal_tower_through(stream_graph_from_edges(1, []), 0) == [0]
    with pytest.raises(errors.UnknownNode):
        maximal_tower_through(tower, 5)


def test_lyapunov_path_values():
    g = _toy([(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)])
    part, dag, sg = _analyze_graph(g)
    lyap = synthesize_lyapunov(sg, dag)
    np.testing.assert_allclose(lyap.node_values, [1.0, 0.5, 0.0])
    assert check_lyapunov(g, sg, lyap).ok


def test_lyapunov_single_node_constant():
    g = _toy([(0, 1), (1, 0)])
    part, dag, sg = _analyze_graph(g)
    lyap = synthesize_lyapunov(sg, dag)
    assert np.all(lyap.values == 0)


def test_lyapunov_logistic_25(report_25):
    lv = report_25.lyapunov
    assert lv.node_values[0] > lv.node_values[1]
    res = check_lyapunov(report_25.graph, report_25.stream, lv)
    assert res.ok and res.edge_violations == [] and res.stream_violations == []


def test_lyapunov_check_catches_violation(report_25):
    lv = report_25.lyapunov
    bad = type(lv)(lv.values[::-1].copy(), lv.node_values[::-1].copy())
    res = check_lyapunov(report_25.graph, report_25.stream, bad)
    assert not res.ok and res.stream_violations


def test_topological_levels_cycle_witness():
    adj = Adjacency.from_pairs(4, [0, 1, 2, 3], [1, 2, 1, 0])
    with pytest.raises(errors.CycleDetected) as exc:
        topological_levels(adj)
    assert set(exc.value.cycle) == {1, 2}


@pytest.fixture(scope="module")
def sinpi_graph():
    cover = full_cover(Box((0.0,), (1.0,)), 8)
    return build_transition_graph(sin_pi_flow(), cover, cover.cell_diameter)


def test_sigma_examples(sinpi_graph):
    g = sinpi_graph
    w = g.cover.cell_width[0]
    a, b = locate(g.cover, 0.01), locate(g.cover, 0.99)
    assert sigma_cost(g, a, b) == pytest.approx(0.98, abs=2 * w)
    assert sigma_cost(g, a, a) == 0.0
    # downhill along the flow the cost is within the jump tolerance
    assert sigma_cost(g, locate(g.cover, 0.9), locate(g.cover, 0.1)) <= 0.1


def test_sigma_unreachable():
    g = _toy([(0, 1)])
    with pytest.raises(errors.Unreachable):
        sigma_cost(g, 1, 0)


def test_reachability_examples(report_25):
    g = report_25.graph
    z = locate(g.cover, 0.0)
    assert len(downstream_set(g, z)) == g.n
    p = report_25.stream.nodes[1].boxes[0]
    assert len(upstream_set(g, g.cover.box_id(int(p)))) == g.n
    t = _toy([(0, 0)], codes=(0,))
    assert downstream_set(t, 0) == {t.cover.box_id(0)}
    with pytest.raises(errors.UnknownId):
        downstream_set(t, 5)
