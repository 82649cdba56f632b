"""Property-based checks of the structural invariants."""
import json

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from streamlab.boxcover import Box, BoxCover, full_cover, gap_between, hull, locate, subdivide
from streamlab.nonwandering import NwGraph, collapse_loops
from streamlab.pipeline import AnalysisConfig, AnalysisReport, check_acyclic, check_transitive
from streamlab.serialize import emit_json, graph_signature, parse_report
from streamlab.streamgraph import (
    check_connected, check_lyapunov, condense, is_tower, maximal_tower_through, recurrent_components,
    sigma_costs_from, stream_graph, stream_graph_from_edges, synthesize_lyapunov, transitive_closure,
)
from streamlab.systems import logistic, orbit
from streamlab.transition import Adjacency, TransitionGraph, build_jump_edges

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def covers(draw, max_dim=2):
    dim = draw(st.integers(1, max_dim))
    depth = draw(st.integers(1, 4 if dim == 2 else 6))
    periodic = draw(st.integers(0, (1 << dim) - 1))
    lo = draw(st.lists(st.floats(-5, 5), min_size=dim, max_size=dim))
    width = draw(st.lists(st.floats(0.1, 10), min_size=dim, max_size=dim))
    root = Box(tuple(lo), tuple(a + w for a, w in zip(lo, width)), periodic)
    total = 1 << (depth * dim)
    codes = draw(st.lists(st.integers(0, total - 1), min_size=1, max_size=min(total, 40), unique=True))
    return BoxCover(root, depth, np.array(codes))


@st.composite
def dags(draw, max_nodes=7):
    k = draw(st.integers(1, max_nodes))
    pairs = draw(st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), max_size=3 * k))
    return k, sorted({(min(a, b), max(a, b)) for a, b in pairs if a != b})


@st.composite
def box_graphs(draw):
    """Random step relation on a 1D cover with an epsilon of a few cells."""
    depth = draw(st.integers(3, 5))
    n = 1 << depth
    cover = full_cover(Box((0.0,), (1.0,)), depth)
    m = draw(st.integers(n, 3 * n))
    src = draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m))
    dst = draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m))
    eps = draw(st.sampled_from([0.0, 1.0 / n, 2.5 / n]))
    return TransitionGraph(cover, Adjacency.from_pairs(n, src, dst), build_jump_edges(cover, eps), eps)


# systems -----------------------------------------------------------------------

@SETTINGS
@given(st.floats(0.0, 4.0), st.floats(0.0, 1.0), st.integers(0, 30), st.integers(0, 30))
def test_orbit_semigroup(mu, x, n, m):
    s = logistic(mu, region=Box((0.0,), (1.0,)))
    whole = orbit(s, x, n + m)
    tail = orbit(s, whole[n], m)
    np.testing.assert_array_equal(whole[n:], tail)


# covers ------------------------------------------------------------------------

@SETTINGS
@given(covers())
def test_locate_center_identity(cover):
    for pos, c in enumerate(cover.centers()):
        assert cover.position(locate(cover, c)) == pos


@SETTINGS
@given(covers(), st.data())
def test_subdivide_preserves_volume(cover, data):
    pos = data.draw(st.lists(st.integers(0, len(cover) - 1), min_size=1, unique=True))
    sub = subdivide(cover, np.array(pos))
    cell = lambda c: float(np.prod(c.cell_width))
    assert np.isclose(len(sub) * cell(sub), len(pos) * cell(cover), rtol=1e-12)
    # each child lies inside its parent
    parents = cover.indices(np.array(pos))
    kids = sub.indices() // 2
    assert {tuple(r) for r in kids} == {tuple(r) for r in parents}


@SETTINGS
@given(covers(), st.data())
def test_gap_triangle_through_intermediate(cover, data):
    a, b, c = (data.draw(st.integers(0, len(cover) - 1)) for _ in range(3))
    g = lambda u, v: float(gap_between(cover, [u], [v])[0])
    # gaps between closed boxes obey the triangle law once the intermediate
    # box's own diameter is paid for
    assert g(a, c) <= g(a, b) + g(b, c) + cover.cell_diameter + 1e-12


def test_gap_triangle_without_diameter_fails():
    cover = full_cover(Box((0.0,), (1.0,)), 3)
    g = lambda u, v: float(gap_between(cover, [u], [v])[0])
    assert g(0, 2) > g(0, 1) + g(1, 2)


@SETTINGS
@given(covers(), st.data())
def test_hull_contains_cells(cover, data):
    pos = np.array(data.draw(st.lists(st.integers(0, len(cover) - 1), min_size=1, unique=True)))
    h = hull(cover, pos)
    ctr = cover.centers(pos)
    per = cover.root.periodic
    ctr[:, per] = np.where(ctr[:, per] < h.lower[per], ctr[:, per] + cover.root.width[per], ctr[:, per])
    assert np.all((ctr >= h.lower - 1e-9) & (ctr <= h.upper + 1e-9))


# jumps -------------------------------------------------------------------------

@SETTINGS
@given(covers(), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_jump_symmetric_monotone_bounded(cover, e1, e2):
    e1, e2 = sorted((e1, e2))
    j1, j2 = build_jump_edges(cover, e1), build_jump_edges(cover, e2)
    assert j1.transpose() == j1
    assert set(map(tuple, j1.pairs())) <= set(map(tuple, j2.pairs()))
    if j1.nnz:
        assert j1.weights.max() <= e1 * (1 + 1e-12)
        np.testing.assert_allclose(j1.weights, gap_between(cover, j1.sources(), j1.indices), atol=1e-12)


# stream graphs -----------------------------------------------------------------

@SETTINGS
@given(dags())
def test_stream_graph_invariants(dag):
    k, edges = dag
    sg = stream_graph_from_edges(k, edges)
    assert check_acyclic(sg).passed and check_transitive(sg).passed
    assert sorted(transitive_closure(k, sg.edges)) == sorted(sg.edges)
    if is_tower(sg):
        assert check_connected(sg).ok
    m = sg.matrix()
    for node in range(k):
        chain = maximal_tower_through(sg, node)
        assert node in chain
        assert not m[:, chain[0]].any() and not m[chain[-1]].any()
        assert all(m[a, b] for a, b in zip(chain, chain[1:]))
    assert sorted(stream_graph_from_edges(k, sg.reduced_edges).edges) == sorted(sg.edges)


@SETTINGS
@given(box_graphs())
def test_box_graph_pipeline_invariants(graph):
    part = recurrent_components(graph)
    seen = np.concatenate(part.nodes + [part.transient])
    assert sorted(seen) == list(range(graph.n))
    dag = condense(graph, part)
    sg = stream_graph(dag, part)
    assert check_acyclic(sg).passed and check_transitive(sg).passed
    lyap = synthesize_lyapunov(sg, dag)
    res = check_lyapunov(graph, sg, lyap)
    assert res.ok, res


@SETTINGS
@given(box_graphs(), st.data())
def test_sigma_triangle(graph, data):
    idx = [data.draw(st.integers(0, graph.n - 1)) for _ in range(3)]
    d = sigma_costs_from(graph, np.arange(graph.n))
    a, b, c = idx
    assert d[a, c] <= d[a, b] + d[b, c] + 1e-9
    assert d[a, a] == 0


@SETTINGS
@given(st.integers(1, 6), st.data())
def test_collapse_loops_acyclic(k, data):
    e = data.draw(st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), max_size=3 * k))
    e = sorted({p for p in e if p[0] != p[1]})
    nw = NwGraph([np.array([i / k]) for i in range(k)], ["repellor"] * k, list(range(k)), e, 1e-2)
    graph, mapping = collapse_loops(nw)
    assert graph.node_count <= k and check_acyclic(graph).passed
    for a, b in e:
        assert mapping[a] == mapping[b] or (mapping[a], mapping[b]) in set(graph.edges)


@SETTINGS
@given(box_graphs())
def test_json_roundtrip(graph):
    part = recurrent_components(graph)
    sg = stream_graph(condense(graph, part), part)
    rep = AnalysisReport(AnalysisConfig(logistic(2.5, region=Box((0.0,), (1.0,)))), [], sg)
    text = emit_json(rep)
    json.loads(text)
    assert graph_signature(parse_report(text).stream) == graph_signature(sg)
