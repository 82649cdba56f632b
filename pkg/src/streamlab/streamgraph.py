"""Recurrent components, condensation, stream graphs and Lyapunov synthesis.

Chains are realized by the relation ``(I + J) o S``: one step edge followed by
at most one jump.  To keep the graph linear in size this is encoded on a
doubled vertex set: ``i`` is box ``i`` and ``n + j`` is "landed in box ``j``
after a step".  Box ``i`` has an edge to ``n + j`` for every step ``i -> j``,
and ``n + j`` has edges to ``j`` and to every jump neighbour of ``j``.
A box is chain recurrent iff its strong component in this graph is not a
singleton.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components, dijkstra

from .boxcover import Box, BoxCover, BoxId, hull
from .errors import CycleDetected, UnknownId, UnknownNode, Unreachable
from .transition import Adjacency, TransitionGraph

CLASSES = ("top", "bottom", "interior", "isolated")


# doubled chain graph -------------------------------------------------------------

def doubled_graph(n: int, step: Adjacency, jump: Adjacency, direct: Optional[Adjacency] = None) -> sp.csr_matrix:
    """Chain relation on ``2n`` vertices; ``direct`` adds plain box-to-box edges."""
    s_src, s_dst = step.sources(), step.indices
    j_src, j_dst = jump.sources(), jump.indices
    rows = [s_src, n + np.arange(n), n + j_src]
    cols = [n + s_dst, np.arange(n), j_dst]
    if direct is not None:
        rows.append(direct.sources())
        cols.append(direct.indices)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    m = sp.csr_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(2 * n, 2 * n))
    m.sum_duplicates()
    return m


def chain_relation(n: int, step: Adjacency, jump: Adjacency, orbit: Optional[Adjacency] = None) -> sp.csr_matrix:
    """Doubled chain graph with recurrent boxes linked to their jump neighbours.

    A recurrent point returns to itself by a chain whose last jump may land
    anywhere within epsilon of it, so at scale ``2 * epsilon`` it reaches its
    whole jump neighbourhood.  Adding those edges (one pass, from boxes that are
    recurrent in the plain relation) merges the one- or two-box shells that
    box discretization leaves around repelling points.
    """
    base = doubled_graph(n, step, jump, orbit)
    rec = recurrent_mask(n, base)
    src = jump.sources()
    keep = rec[src]
    if not keep.any():
        return base
    extra = sp.csr_matrix((np.ones(int(keep.sum()), dtype=np.int8), (src[keep], jump.indices[keep])),
                          shape=base.shape)
    m = (base + extra).tocsr()
    m.data[:] = 1
    return m


def chain_matrix(graph: TransitionGraph) -> sp.csr_matrix:
    m = graph.__dict__.get("_chain")
    if m is None:
        m = chain_relation(graph.n, graph.step, graph.jump)
        graph.__dict__["_chain"] = m
    return m


def recurrent_mask(n: int, matrix: sp.csr_matrix) -> np.ndarray:
    """Boxes (first ``n`` vertices) lying on a cycle of ``matrix``."""
    ncomp, labels = connected_components(matrix, directed=True, connection="strong")
    size = np.bincount(labels, minlength=ncomp)
    rec = size[labels[:n]] > 1
    if matrix.shape[0] == n:
        # plain box graphs: singletons count only with a self loop
        rec |= matrix.diagonal()[:n] != 0
    return rec


# topological utilities ------------------------------------------------------------

def _rows(adj: Adjacency, verts: np.ndarray):
    """Concatenated out-neighbours of ``verts`` and the owning vertex of each."""
    starts, stops = adj.indptr[verts], adj.indptr[verts + 1]
    counts = stops - starts
    if counts.sum() == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    owner = np.repeat(verts, counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return owner, adj.indices[np.repeat(starts, counts) + offs]


def _find_cycle(adj: Adjacency, alive: np.ndarray) -> list:
    v = int(np.flatnonzero(alive)[0])
    seen = {}
    path = []
    while v not in seen:
        seen[v] = len(path)
        path.append(v)
        nxt = [int(u) for u in adj.neighbors(v) if alive[u]]
        v = nxt[0]
    return path[seen[v]:] + [v]


def topological_levels(adj: Adjacency) -> np.ndarray:
    """Longest-path depth of every vertex from the sources (Kahn, level by level).

    Raises :class:`CycleDetected` with a witness cycle when ``adj`` is cyclic.
    """
    n = adj.n
    indeg = np.bincount(adj.indices, minlength=n)
    level = np.full(n, -1, dtype=np.int64)
    frontier = np.flatnonzero(indeg == 0)
    depth = 0
    while len(frontier):
        level[frontier] = depth
        _, succ = _rows(adj, frontier)
        if len(succ) == 0:
            break
        np.subtract.at(indeg, succ, 1)
        cand = np.unique(succ)
        frontier = cand[indeg[cand] == 0]
        depth += 1
    if (level < 0).any():
        cyc = _find_cycle(adj, level < 0)
        raise CycleDetected(f"directed cycle through {cyc}", cycle=cyc)
    return level


def _level_groups(level: np.ndarray) -> list:
    order = np.argsort(level, kind="stable")
    bounds = np.flatnonzero(np.diff(level[order])) + 1
    return np.split(order, bounds)


# condensation ------------------------------------------------------------------

@dataclass(eq=False)
class Condensation:
    """Quotient DAG of the doubled chain graph by its strong components."""

    n_boxes: int
    labels: np.ndarray
    succ: Adjacency
    level: np.ndarray
    size: np.ndarray
    comp_node: np.ndarray = field(default=None)
    node_comp: np.ndarray = field(default=None)

    @property
    def ncomp(self) -> int:
        return self.succ.n

    @property
    def box_labels(self) -> np.ndarray:
        return self.labels[: self.n_boxes]

    def groups(self) -> list:
        """Components grouped by level, sources first."""
        return _level_groups(self.level)

    @property
    def node_count(self) -> int:
        return 0 if self.node_comp is None else len(self.node_comp)


def condense_matrix(matrix: sp.csr_matrix, n_boxes: int) -> Condensation:
    ncomp, labels = connected_components(matrix, directed=True, connection="strong")
    coo = matrix.tocoo()
    a, b = labels[coo.row], labels[coo.col]
    keep = a != b
    succ = Adjacency.from_pairs(ncomp, a[keep], b[keep])
    level = topological_levels(succ)
    size = np.bincount(labels, minlength=ncomp)
    return Condensation(n_boxes, labels, succ, level, size)


@dataclass(eq=False)
class NodePartition:
    cover: BoxCover
    node_of: np.ndarray
    nodes: list
    condensation: Condensation = field(repr=False, default=None)

    @property
    def transient(self) -> np.ndarray:
        return np.flatnonzero(self.node_of < 0)

    def node_ids(self, k: int) -> list:
        return [self.cover.box_id(int(p)) for p in self.nodes[k]]

    def node_of_box(self, box: BoxId) -> Optional[int]:
        k = int(self.node_of[self.cover.position(box)])
        return None if k < 0 else k


def recurrent_components(graph: TransitionGraph) -> NodePartition:
    """Chain-recurrent boxes grouped into nodes.

    Nodes are numbered in topological order of the chain relation (upstream
    first), ties broken by the smallest box code.
    """
    n = graph.n
    cond = condense_matrix(chain_matrix(graph), n)
    lab = cond.box_labels
    rec_comp = cond.size > 1
    comps = np.unique(lab[rec_comp[lab]])
    first = np.full(cond.ncomp, np.iinfo(np.int64).max)
    np.minimum.at(first, lab, np.arange(n))
    order = np.lexsort((first[comps], cond.level[comps]))
    comps = comps[order]
    comp_node = np.full(cond.ncomp, -1, dtype=np.int64)
    comp_node[comps] = np.arange(len(comps))
    cond.comp_node = comp_node
    cond.node_comp = comps
    node_of = comp_node[lab]
    pos = np.argsort(node_of, kind="stable")
    srt = node_of[pos]
    nodes = [pos[srt == k] for k in range(len(comps))]
    return NodePartition(graph.cover, node_of, nodes, cond)


def condense(graph: TransitionGraph, partition: NodePartition) -> Condensation:
    """Condensation DAG: components of the doubled chain graph.

    ``comp_node`` maps each component to its node id (-1 for transients) and
    ``node_comp`` is the inverse.
    """
    if partition.condensation is not None and partition.condensation.n_boxes == graph.n:
        return partition.condensation
    return recurrent_components(graph).condensation


# stream graphs -------------------------------------------------------------------

@dataclass
class NodeInfo:
    id: int
    boxes: np.ndarray = field(repr=False)
    hull: Optional[Box]
    classification: str
    cardinality: int


@dataclass(eq=False)
class StreamGraph:
    nodes: list
    edges: list
    reduced_edges: list
    provenance: dict = field(default_factory=dict)
    cover: Optional[BoxCover] = field(default=None, repr=False)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def node(self, k: int) -> NodeInfo:
        if not 0 <= k < len(self.nodes):
            raise UnknownNode(f"no node {k}")
        return self.nodes[k]

    def matrix(self, reduced: bool = False) -> np.ndarray:
        k = len(self.nodes)
        m = np.zeros((k, k), dtype=bool)
        e = self.reduced_edges if reduced else self.edges
        if e:
            a = np.array(e)
            m[a[:, 0], a[:, 1]] = True
        return m

    def classes(self) -> list:
        return [nd.classification for nd in self.nodes]


def classify(k: int, edges: Iterable) -> list:
    ins = np.zeros(k, dtype=bool)
    outs = np.zeros(k, dtype=bool)
    for a, b in edges:
        outs[a] = True
        ins[b] = True
    out = []
    for i in range(k):
        if ins[i] and outs[i]:
            out.append("interior")
        elif outs[i]:
            out.append("top")
        elif ins[i]:
            out.append("bottom")
        else:
            out.append("isolated")
    return out


def reduce_closed(k: int, edges: Sequence) -> list:
    """Transitive reduction of a transitively closed DAG."""
    if not edges:
        return []
    m = np.zeros((k, k), dtype=bool)
    a = np.array(edges)
    m[a[:, 0], a[:, 1]] = True
    via = (m.astype(np.int64) @ m.astype(np.int64)) > 0
    r = m & ~via
    return [tuple(map(int, e)) for e in np.argwhere(r)]


def transitive_closure(k: int, edges: Sequence) -> list:
    """Reachability (irreflexive unless on a cycle) of a small node graph."""
    m = np.zeros((k, k), dtype=bool)
    for a, b in edges:
        m[a, b] = True
    for j in range(k):
        m |= np.outer(m[:, j], m[j, :])
    return [tuple(map(int, e)) for e in np.argwhere(m)]


def stream_graph_from_edges(k: int, edges: Iterable, nodes: Optional[list] = None,
                            provenance: Optional[dict] = None, cover=None) -> StreamGraph:
    """Stream graph on ``k`` abstract nodes from any edge set (closed here).

    Raises :class:`CycleDetected` if the edges contain a directed cycle.
    """
    edges = sorted({(int(a), int(b)) for a, b in edges})
    adj = Adjacency.from_pairs(k, [a for a, _ in edges], [b for _, b in edges])
    topological_levels(adj)
    closed = transitive_closure(k, edges)
    cls = classify(k, closed)
    if nodes is None:
        nodes = [NodeInfo(i, np.zeros(0, np.int64), None, cls[i], 0) for i in range(k)]
    else:
        for nd, c in zip(nodes, cls):
            nd.classification = c
    return StreamGraph(nodes, closed, reduce_closed(k, closed), dict(provenance or {}), cover)


def node_reachability(cond: Condensation) -> np.ndarray:
    """``R[c, k]``: node ``k`` is reachable from component ``c`` by a non-empty path."""
    k = cond.node_count
    nwords = max(1, (k + 63) // 64)
    bits = np.zeros((cond.ncomp, nwords), dtype=np.uint64)
    own = np.zeros((cond.ncomp, nwords), dtype=np.uint64)
    if k:
        nc = cond.node_comp
        own[nc, np.arange(k) // 64] = np.left_shift(np.uint64(1), (np.arange(k) % 64).astype(np.uint64))
    for grp in reversed(cond.groups()):
        owner, succ = _rows(cond.succ, grp)
        if len(succ):
            np.bitwise_or.at(bits, owner, bits[succ] | own[succ])
    r = np.zeros((cond.ncomp, k), dtype=bool)
    for i in range(k):
        r[:, i] = (bits[:, i // 64] >> np.uint64(i % 64)) & np.uint64(1) != 0
    return r


def stream_graph(dag: Condensation, partition: NodePartition, provenance: Optional[dict] = None) -> StreamGraph:
    """Nodes, full reachability edges, classification and reduced edges."""
    topological_levels(dag.succ)
    k = dag.node_count
    reach = node_reachability(dag)
    nr = reach[dag.node_comp] if k else np.zeros((0, 0), bool)
    edges = [tuple(map(int, e)) for e in np.argwhere(nr)]
    if any(a == b for a, b in edges):
        cyc = next([a, a] for a, b in edges if a == b)
        raise CycleDetected("node reaches itself through the condensation", cycle=cyc)
    cls = classify(k, edges)
    nodes = [NodeInfo(i, partition.nodes[i], hull(partition.cover, partition.nodes[i]), cls[i],
                      len(partition.nodes[i])) for i in range(k)]
    return StreamGraph(nodes, edges, reduce_closed(k, edges), dict(provenance or {}), partition.cover)


def transitive_reduction(sg: StreamGraph) -> list:
    red = reduce_closed(sg.node_count, sg.edges)
    sg.reduced_edges = red
    return red


def is_tower(sg: StreamGraph) -> bool:
    m = sg.matrix()
    k = len(m)
    off = ~np.eye(k, dtype=bool)
    return bool(np.all((m ^ m.T)[off]))


@dataclass
class ConnectivityResult:
    ok: bool
    witness: Optional[tuple] = None

    def __bool__(self) -> bool:
        return self.ok


def check_connected(sg: StreamGraph) -> ConnectivityResult:
    k = sg.node_count
    if k <= 1:
        return ConnectivityResult(True)
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in sg.edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    root0 = find(0)
    part = [i for i in range(k) if find(i) == root0]
    if len(part) == k:
        return ConnectivityResult(True)
    rest = [i for i in range(k) if find(i) != root0]
    return ConnectivityResult(False, (part, rest))


def maximal_tower_through(sg: StreamGraph, node: int) -> list:
    """Greedy maximal chain through ``node`` along reduced edges (smallest id first)."""
    sg.node(node)
    m = sg.matrix(reduced=True)
    up = []
    v = node
    while m[:, v].any():
        v = int(np.flatnonzero(m[:, v])[0])
        up.append(v)
    down = []
    v = node
    while m[v].any():
        v = int(np.flatnonzero(m[v])[0])
        down.append(v)
    return up[::-1] + [node] + down


# Lyapunov synthesis --------------------------------------------------------------

@dataclass
class LyapunovAssignment:
    """Values per box position; ``node_values[k]`` is the value on node ``k``."""

    values: np.ndarray
    node_values: np.ndarray
    comp_values: np.ndarray = field(repr=False, default=None)

    def value_of(self, cover: BoxCover, box: BoxId) -> float:
        return float(self.values[cover.position(box)])


def synthesize_lyapunov(sg: StreamGraph, dag: Condensation) -> LyapunovAssignment:
    """Longest-path level counted in nodes, normalized to ``[0, 1]``.

    ``g(c) = max over successors s of g(s) + [s is a node]``, so values drop by
    at least one level across every stream edge and never increase along the
    chain relation.
    """
    topological_levels(dag.succ)
    g = np.zeros(dag.ncomp, dtype=np.int64)
    isnode = (dag.comp_node >= 0).astype(np.int64) if dag.comp_node is not None else np.zeros(dag.ncomp, np.int64)
    for grp in reversed(dag.groups()):
        owner, succ = _rows(dag.succ, grp)
        if len(succ):
            np.maximum.at(g, owner, g[succ] + isnode[succ])
    top = g.max() if len(g) else 0
    vals = g / top if top > 0 else np.zeros(dag.ncomp)
    box_vals = vals[dag.box_labels]
    node_vals = vals[dag.node_comp] if dag.node_count else np.zeros(0)
    return LyapunovAssignment(box_vals, node_vals, vals)


@dataclass
class LyapunovCheck:
    ok: bool
    edge_violations: list
    stream_violations: list

    def __bool__(self) -> bool:
        return self.ok


def check_lyapunov(graph: TransitionGraph, sg: StreamGraph, lyap: LyapunovAssignment) -> LyapunovCheck:
    """Exact check on the finite graph.

    Every chain edge (a step, or a step followed by a jump) must be
    non-increasing, and values must drop by at least ``1 / node_count`` across
    each stream edge.
    """
    v = lyap.values
    m = chain_matrix(graph).tocoo()
    n = graph.n
    # a step into box j may be followed by a jump, so compare against the
    # largest value among j and its jump neighbours
    land = np.full(n, -np.inf)
    lm = m.row >= n
    np.maximum.at(land, m.row[lm] - n, v[m.col[lm]])
    bm = m.row < n
    rows, cols = m.row[bm], m.col[bm]
    target = np.where(cols >= n, land[cols % n], v[cols % n])
    bad = v[rows] + 1e-12 < target
    edge_viol = [(int(a), int(b % n)) for a, b in zip(rows[bad], cols[bad])]
    k = max(sg.node_count, 1)
    stream_viol = [(a, b) for a, b in sg.edges
                   if not lyap.node_values[a] - lyap.node_values[b] >= 1.0 / k - 1e-12]
    return LyapunovCheck(not edge_viol and not stream_viol, edge_viol, stream_viol)


# reachability and sigma costs ----------------------------------------------------

def _position(cover: BoxCover, box) -> int:
    if isinstance(box, BoxId):
        return cover.position(box)
    p = int(box)
    if not 0 <= p < len(cover):
        raise UnknownId(f"position {p} out of range")
    return p


def downstream_positions(graph: TransitionGraph, positions) -> np.ndarray:
    """Boxes chain-reachable from any of ``positions`` (inclusive)."""
    return _reach(chain_matrix(graph), graph.n, positions)


def upstream_positions(graph: TransitionGraph, positions) -> np.ndarray:
    m = graph.__dict__.get("_chainT")
    if m is None:
        m = chain_matrix(graph).T.tocsr()
        graph.__dict__["_chainT"] = m
    return _reach(m, graph.n, positions)


def _reach(m: sp.csr_matrix, n: int, positions) -> np.ndarray:
    positions = np.atleast_1d(np.asarray(positions, dtype=np.int64))
    if len(positions) == 0:
        return positions
    if len(positions) == 1:
        seen = breadth_first_order(m, int(positions[0]), directed=True, return_predecessors=False)
    else:
        # virtual source wired to all starting boxes
        N = m.shape[0]
        extra = sp.csr_matrix((np.ones(len(positions), np.int8), (np.full(len(positions), N), positions)),
                              shape=(N + 1, N + 1))
        big = sp.bmat([[m, None], [None, sp.csr_matrix((1, 1), dtype=np.int8)]]).tocsr() + extra
        seen = breadth_first_order(big, N, directed=True, return_predecessors=False)
        seen = seen[seen < N]
    boxes = seen[seen < n]
    return np.unique(np.concatenate([boxes, positions]))


def downstream_set(graph: TransitionGraph, box) -> frozenset:
    p = _position(graph.cover, box)
    return frozenset(graph.cover.box_id(int(q)) for q in downstream_positions(graph, [p]))


def upstream_set(graph: TransitionGraph, box) -> frozenset:
    p = _position(graph.cover, box)
    return frozenset(graph.cover.box_id(int(q)) for q in upstream_positions(graph, [p]))


def sigma_matrix(graph: TransitionGraph) -> sp.csr_matrix:
    """Weighted box graph: step edges cost 0, jump edges their centre distance."""
    m = graph.__dict__.get("_sigma")
    if m is None:
        n = graph.n
        src = np.concatenate([graph.step.sources(), graph.jump.sources()])
        dst = np.concatenate([graph.step.indices, graph.jump.indices])
        w = np.concatenate([np.zeros(graph.step.nnz), graph.jump_centre_weights()])
        order = np.argsort(w, kind="stable")
        adj = Adjacency.from_pairs(n, src[order], dst[order], w[order])
        m = sp.csr_matrix((adj.weights, adj.indices, adj.indptr), shape=(n, n))
        graph.__dict__["_sigma"] = m
    return m


def sigma_costs_from(graph: TransitionGraph, sources) -> np.ndarray:
    """Σ-costs from each source position to every box (``inf`` if unreachable)."""
    src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    return np.atleast_2d(dijkstra(sigma_matrix(graph), directed=True, indices=src))


def sigma_cost(graph: TransitionGraph, source, target) -> float:
    """Least total jump length over mixed step/jump paths from source to target."""
    a = _position(graph.cover, source)
    b = _position(graph.cover, target)
    d = float(sigma_costs_from(graph, [a])[0, b])
    if not np.isfinite(d):
        raise Unreachable(f"box {b} is not reachable from box {a} under the jump cap")
    return d
