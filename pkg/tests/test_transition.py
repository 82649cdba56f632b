import numpy as np
import pytest

from streamlab import errors
from streamlab.boxcover import Box, full_cover, locate, parent_codes
from streamlab.systems import analysis_region, circle_poles, logistic, sin_pi_flow, unimodal_composite
from streamlab.transition import (
    Adjacency, TransitionGraph, build_jump_edges, build_step_edges, build_transition_graph, compose_step,
)

from conftest import PERIOD2_32

UNIT = Box((0.0,), (1.0,))


def _graph(system, depth, eps=0.0, mode="sampled+lipschitz-pad"):
    cover = full_cover(analysis_region(system), depth)
    return build_transition_graph(system, cover, eps, mode)


def test_step_self_edges_at_fixed_points():
    s = logistic(2.5)
    cover = full_cover(Box((0.0,), (0.75,)), 4)
    step, _ = build_step_edges(s, cover)
    p = cover.position(locate(cover, 0.6))
    assert p in step.neighbors(p)
    z = cover.position(locate(cover, 0.0))
    assert z in step.neighbors(z)


def test_step_edge_hits_image_of_critical_point():
    s = logistic(3.5)
    cover = full_cover(Box((0.0,), (1.0,)), 8)
    step, _ = build_step_edges(s, cover)
    a = cover.position(locate(cover, 0.5))
    assert cover.position(locate(cover, 0.875)) in step.neighbors(a)


def test_jump_edges_examples(caplog):
    cover = full_cover(UNIT, 3)
    j0 = build_jump_edges(cover, 0.0)
    assert list(j0.out_degree()) == [1, 2, 2, 2, 2, 2, 2, 1]
    j = build_jump_edges(cover, 0.2)
    assert set(j.neighbors(3)) == {1, 2, 4, 5}
    np.testing.assert_allclose(sorted(j.weights[j.indptr[3]:j.indptr[4]]), [0, 0, 0.125, 0.125])
    assert build_jump_edges(cover, -1.0) == j0
    assert "negative epsilon" in caplog.text


def test_jump_weights_bounded_by_epsilon():
    cover = full_cover(Box((0.0, 0.0), (1.0, 2.0)), 4)
    j = build_jump_edges(cover, 0.3)
    assert j.weights.max() <= 0.3


def test_compose_identity_and_two_cycle():
    cover = full_cover(UNIT, 1)
    step = Adjacency.from_pairs(2, [0, 1], [1, 0])
    g = TransitionGraph(cover, step, build_jump_edges(cover, 0.0), 0.0)
    assert compose_step(g, 1) == Adjacency.from_matrix(step.matrix())
    sq = compose_step(g, 2)
    assert set(map(tuple, sq.pairs())) == {(0, 0), (1, 1)}
    with pytest.raises(errors.ConfigurationError):
        compose_step(g, 0)


def test_compose_period2_boxes_gain_self_edges():
    g = _graph(logistic(3.2), 10)
    sq = compose_step(g, 2)
    for x in PERIOD2_32:
        p = g.cover.position(locate(g.cover, x))
        assert p in sq.neighbors(p)


@pytest.mark.parametrize("system", [logistic(3.84), sin_pi_flow(), circle_poles(), unimodal_composite()],
                         ids=lambda s: s.kind)
def test_outer_approximation_soundness(system):
    g = _graph(system, 10)
    rng = np.random.default_rng(7)
    region = g.cover.root
    x = region.lo[0] + rng.random(10_000) * (region.hi[0] - region.lo[0])
    from streamlab.systems import evaluate_batch
    fx = evaluate_batch(system, x[:, None])
    a = g.cover.locate_positions(x[:, None])
    b = g.cover.locate_positions(fx)
    ok = (a >= 0) & (b >= 0)
    m = g.step.matrix().tocsr()
    hits = np.asarray(m[a[ok], b[ok]]).ravel()
    assert hits.all()


def test_refinement_nesting_padded():
    s = logistic(3.84)
    coarse = _graph(s, 8)
    fine = _graph(s, 9)
    pairs = fine.cover.codes[fine.step.pairs()]
    parents = parent_codes(pairs.ravel(), 9, 1).reshape(-1, 2)
    pa = coarse.cover.positions_of_codes(parents[:, 0])
    pb = coarse.cover.positions_of_codes(parents[:, 1])
    coarse_set = set(map(tuple, coarse.step.pairs()))
    assert all((int(u), int(v)) in coarse_set for u, v in zip(pa, pb))


def test_jump_symmetric_and_monotone():
    cover = full_cover(Box((0.0, 0.0), (1.0, 1.0)), 4)
    j1 = build_jump_edges(cover, 0.1)
    assert j1.transpose() == j1
    j2 = build_jump_edges(cover, 0.2)
    assert set(map(tuple, j1.pairs())) <= set(map(tuple, j2.pairs()))


def test_cache_roundtrip(tmp_path):
    s = logistic(3.2)
    cover = full_cover(analysis_region(s), 8)
    g1 = build_transition_graph(s, cover, cover.cell_diameter, cache_dir=tmp_path)
    g2 = build_transition_graph(s, cover, cover.cell_diameter, cache_dir=tmp_path)
    assert len(list(tmp_path.iterdir())) == 3
    assert g1.step == g2.step and g1.jump == g2.jump
    np.testing.assert_array_equal(g1.leaking, g2.leaking)


def test_edge_budget_guard():
    s = logistic(3.84)
    cover = full_cover(analysis_region(s), 10)
    with pytest.raises(errors.GraphTooLarge):
        build_step_edges(s, cover, max_edges=100)
