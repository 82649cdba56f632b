"""Point-level chain predicates and the non-wandering graph of 1D maps.

These work directly on orbits rather than boxes.  An ``eps``-αω chain from
``x`` to ``y`` jumps once near ``x``, follows a pure orbit and jumps once more
onto ``y``; it is probed on a uniform grid of the ``eps``-ball around ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .boxcover import Box, touching_neighbors
from .errors import ConfigurationError, InsufficientSeparation, UnsupportedDimension
from .streamgraph import NodeInfo, StreamGraph, stream_graph_from_edges, transitive_closure
from .systems import SemiFlowSpec, analysis_region, cluster_points, evaluate_batch, periodic_orbits

DEFAULT_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3)


@dataclass(frozen=True)
class ChainQuery:
    epsilon: float
    horizon: int = 200
    sample_step: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if self.sample_step is None:
            object.__setattr__(self, "sample_step", self.epsilon / 50.0)
        if not 0 < self.sample_step < self.epsilon:
            raise ConfigurationError("sample_step must lie in (0, epsilon)")

    def at(self, epsilon: float) -> "ChainQuery":
        """Same query at another scale, keeping the step-to-epsilon ratio."""
        return ChainQuery(epsilon, self.horizon, self.sample_step * epsilon / self.epsilon)


def _region(system: SemiFlowSpec) -> Box:
    return analysis_region(system)


def _require_1d(system: SemiFlowSpec) -> None:
    if system.dimension != 1:
        raise UnsupportedDimension("dense chain probing is one-dimensional")


def has_omega_chain(system: SemiFlowSpec, x, query: ChainQuery) -> bool:
    """True iff ``d(F^t(x), x) <= eps`` for some ``1 <= t <= horizon``."""
    region = _region(system)
    x0 = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    z = x0
    for _ in range(query.horizon):
        z = evaluate_batch(system, z)
        if region.distance(z, x0)[0] <= query.epsilon:
            return True
    return False


def probe_grid(region: Box, x: float, epsilon: float, step: float) -> np.ndarray:
    k = int(np.floor(epsilon / step + 1e-9))
    z = x + step * np.arange(-k, k + 1)
    if region.periodic[0]:
        return region.wrap(z[:, None])[:, 0]
    return z[(z >= region.lo[0]) & (z <= region.hi[0])]


def _nearest_distance(region: Box, sorted_targets: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Distance from each ``z`` to the closest of ``sorted_targets`` (1D)."""
    t = sorted_targets
    if region.periodic[0]:
        w = region.width[0]
        t = np.concatenate([t - w, t, t + w])
        z = region.wrap(z[:, None])[:, 0]
    i = np.searchsorted(t, z)
    lo = t[np.clip(i - 1, 0, len(t) - 1)]
    hi = t[np.clip(i, 0, len(t) - 1)]
    return np.minimum(np.abs(z - lo), np.abs(z - hi))


def alphaomega_hits(system: SemiFlowSpec, sources: Sequence[np.ndarray], targets: Sequence[np.ndarray],
                    query: ChainQuery) -> np.ndarray:
    """``hit[i, j]``: an αω chain runs from some point of group ``i`` to group ``j``.

    All probes of all source groups are iterated together.
    """
    _require_1d(system)
    region = _region(system)
    probes, owner = [], []
    for i, pts in enumerate(sources):
        for x in np.atleast_1d(pts):
            z = probe_grid(region, float(x), query.epsilon, query.sample_step)
            probes.append(z)
            owner.append(np.full(len(z), i))
    hit = np.zeros((len(sources), len(targets)), dtype=bool)
    if not probes:
        return hit
    z = np.concatenate(probes)[:, None]
    owner = np.concatenate(owner)
    tsorted = [np.sort(np.atleast_1d(t).astype(float)) for t in targets]
    reached = np.zeros((len(z), len(targets)), dtype=bool)
    for _ in range(query.horizon):
        z = evaluate_batch(system, z)
        for j, t in enumerate(tsorted):
            if len(t):
                reached[:, j] |= _nearest_distance(region, t, z[:, 0]) <= query.epsilon
    for i in range(len(sources)):
        hit[i] = reached[owner == i].any(axis=0)
    return hit


def has_alphaomega_chain(system: SemiFlowSpec, x, y, query: ChainQuery) -> bool:
    """True iff a probe ``z`` within eps of ``x`` has ``d(F^t(z), y) <= eps`` for some t >= 1."""
    _require_1d(system)
    x = float(np.atleast_1d(x)[0])
    y = float(np.atleast_1d(y)[0])
    return bool(alphaomega_hits(system, [np.array([x])], [np.array([y])], query)[0, 0])


@dataclass
class NwGraph:
    """Approximate non-wandering graph; edges may form 2-cycles."""

    nodes: list
    kinds: list
    seeds: list
    edges: list
    epsilon_used: float
    schedule: tuple = ()
    notes: str = "approximate NW semantics: mutual αω-reachability, linkability not checked"

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def two_cycles(self) -> list:
        e = set(self.edges)
        return sorted((a, b) for a, b in e if a < b and (b, a) in e)

    def hull(self, k: int) -> tuple:
        pts = np.asarray(self.nodes[k], dtype=float)
        return float(pts.min()), float(pts.max())


def _omega_points(system: SemiFlowSpec, x: np.ndarray, burn_in: int, horizon: int) -> np.ndarray:
    z = x[:, None].astype(float)
    for _ in range(burn_in):
        z = evaluate_batch(system, z)
    out = np.empty((len(x), horizon))
    for t in range(horizon):
        z = evaluate_batch(system, z)
        out[:, t] = z[:, 0]
    return out


def _orbit_visits(system: SemiFlowSpec, x: float, target: np.ndarray, tol: float, horizon: int, region: Box) -> bool:
    z = np.array([[x]])
    t = np.sort(target)
    for _ in range(horizon):
        z = evaluate_batch(system, z)
        if _nearest_distance(region, t, z[:, 0])[0] <= tol:
            return True
    return False


def _check_separation(sg: StreamGraph) -> None:
    if sg.cover is None:
        return
    owner = np.full(len(sg.cover), -1)
    for nd in sg.nodes:
        owner[nd.boxes] = nd.id
    for nd in sg.nodes:
        ring = touching_neighbors(sg.cover, nd.boxes)
        other = owner[ring]
        clash = other[(other >= 0) & (other != nd.id)]
        if len(clash):
            raise InsufficientSeparation(f"nodes {nd.id} and {int(clash[0])} touch at depth {sg.cover.depth}")


def nw_graph(system: SemiFlowSpec, sg: StreamGraph, schedule: Sequence[float] = DEFAULT_SCHEDULE,
             query: Optional[ChainQuery] = None, max_period: int = 6, burn_in: int = 1000,
             omega_horizon: int = 300, max_seeds: int = 64) -> NwGraph:
    """Non-wandering graph seeded from the nodes of a chains-stream graph.

    Candidate NW nodes inside each stream node are attractor groups (ω-limits
    of sample points that stay in the node) and repellor groups (periodic
    orbits up to ``max_period``).  Periodic orbits within the finest scale of
    an attractor are absorbed into it; the remaining ones are grouped by mutual
    αω reachability at every scale.  An edge needs an αω chain at every scale.
    """
    _require_1d(system)
    schedule = tuple(sorted((float(e) for e in schedule), reverse=True))
    if not schedule:
        raise ConfigurationError("empty epsilon schedule")
    eps_min = schedule[-1]
    query = query or ChainQuery(schedule[0])
    query = query.at(schedule[0])
    _check_separation(sg)
    region = _region(system)
    cover = sg.cover
    node_of = np.full(len(cover), -1) if cover is not None else None
    if cover is not None:
        for nd in sg.nodes:
            node_of[nd.boxes] = nd.id

    def locate_node(pts):
        pos = cover.locate_positions(np.asarray(pts, dtype=float)[:, None])
        return np.where(pos >= 0, node_of[np.maximum(pos, 0)], -1)

    nodes, kinds, seeds = [], [], []
    orbits = periodic_orbits(system, region.lo[0], region.hi[0], max_period=max_period)
    orbit_node = [locate_node(pts) for _, pts, _ in orbits]
    for nd in sg.nodes:
        # attractors: ω-limits of samples that remain in this node
        centres = cover.centers(nd.boxes)[:, 0]
        pick = np.unique(np.linspace(0, len(centres) - 1, min(max_seeds, len(centres))).astype(int))
        om = _omega_points(system, centres[pick], burn_in, omega_horizon)
        groups = []
        for row in om:
            if not (locate_node(row) == nd.id).all():
                continue
            pts = cluster_points(row[:, None], eps_min / 4, region)[:, 0]
            for gi, g in enumerate(groups):
                near = _nearest_distance(region, g, pts).max() <= eps_min / 2
                if near or (_orbit_visits(system, pts[0], g, eps_min, omega_horizon, region)
                            and _orbit_visits(system, g[0], pts, eps_min, omega_horizon, region)):
                    merged = np.union1d(g, pts)
                    groups[gi] = np.sort(cluster_points(merged[:, None], eps_min / 4, region)[:, 0])
                    break
            else:
                groups.append(np.sort(pts))
        # repellors: periodic orbits in this node not absorbed by an attractor
        reps = []
        for (period, pts, _), where in zip(orbits, orbit_node):
            if not (where == nd.id).all():
                continue
            if any(_nearest_distance(region, np.sort(g), pts).min() <= eps_min for g in groups):
                continue
            reps.append(pts)
        if reps:
            mutual = np.ones((len(reps), len(reps)), dtype=bool)
            for eps in schedule:
                mutual &= alphaomega_hits(system, reps, reps, query.at(eps))
            both = mutual & mutual.T
            ncomp, lab = connected_components(sp.csr_matrix(both), directed=False)
            rep_groups = [np.sort(np.concatenate([reps[i] for i in np.flatnonzero(lab == c)])) for c in range(ncomp)]
        else:
            rep_groups = []
        if not groups and not rep_groups:
            rep_groups = [np.sort(centres[pick])]
        for g in groups:
            nodes.append(np.sort(g))
            kinds.append("attractor")
            seeds.append(nd.id)
        for g in rep_groups:
            nodes.append(g)
            kinds.append("repellor")
            seeds.append(nd.id)
    k = len(nodes)
    ok = ~np.eye(k, dtype=bool)
    for eps in schedule:
        ok &= alphaomega_hits(system, nodes, nodes, query.at(eps))
    edges = [tuple(map(int, e)) for e in np.argwhere(ok & ~np.eye(k, dtype=bool))]
    return NwGraph(nodes, kinds, seeds, edges, eps_min, schedule)


def collapse_loops(nw: NwGraph) -> tuple:
    """Merge every directed cycle of ``nw`` into one node.

    Returns ``(graph, mapping)``: a transitively closed acyclic
    :class:`StreamGraph` and, for every NW node, the index of its merged node.
    Merged nodes are numbered by their smallest NW index.
    """
    k = nw.node_count
    if k == 0:
        return stream_graph_from_edges(0, []), np.zeros(0, dtype=np.int64)
    a = np.array(nw.edges, dtype=np.int64).reshape(-1, 2)
    m = sp.csr_matrix((np.ones(len(a)), (a[:, 0], a[:, 1])), shape=(k, k))
    ncomp, lab = connected_components(m, directed=True, connection="strong")
    first = np.full(ncomp, k)
    np.minimum.at(first, lab, np.arange(k))
    rank = np.argsort(np.argsort(first))
    mapping = rank[lab]
    merged = {(int(mapping[x]), int(mapping[y])) for x, y in nw.edges if mapping[x] != mapping[y]}
    closed = transitive_closure(ncomp, merged)
    infos = []
    for c in range(ncomp):
        members = np.flatnonzero(mapping == c)
        pts = np.concatenate([np.atleast_1d(nw.nodes[i]) for i in members])
        box = Box((pts.min(),), (pts.max(),)) if pts.max() > pts.min() else None
        infos.append(NodeInfo(c, members, box, "", len(members)))
    graph = stream_graph_from_edges(ncomp, closed, infos, {"collapsed_from": k})
    return graph, mapping
