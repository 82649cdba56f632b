"""Refinement loop, parameter sweeps and named verification checks."""
from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .boxcover import BoxCover, full_cover, pack, parent_codes, subdivide, touching_neighbors
from .errors import (ConfigurationError, CycleDetected, MissingArtifact, ModeUnsupported,
                     StreamlabError, TrappingViolation, Unreachable)
from .nonwandering import DEFAULT_SCHEDULE, NwGraph, collapse_loops, nw_graph
from .streamgraph import (LyapunovAssignment, StreamGraph, chain_matrix, chain_relation, check_connected,
                          check_lyapunov, condense, downstream_positions, is_tower, maximal_tower_through,
                          recurrent_components, recurrent_mask, sigma_costs_from, stream_graph,
                          synthesize_lyapunov, topological_levels, upstream_positions)
from .systems import SemiFlowSpec, analysis_region, logistic, verify_trapping
from .transition import MODES, Adjacency, TransitionGraph, build_transition_graph, compose_step

log = logging.getLogger(__name__)

CHECKS = ("acyclic", "connected", "tower", "top-bottom", "lyapunov-valid", "f-vs-f2", "nesting",
          "sigma-triangle", "transitive")
DEFAULT_CHECKS = ("acyclic", "connected", "top-bottom", "lyapunov-valid", "transitive")


@dataclass(frozen=True)
class AnalysisConfig:
    system: SemiFlowSpec
    depth_start: int = 6
    depth_max: int = 12
    epsilon_rule: str = "box-diameter"
    epsilon_value: Optional[float] = None
    refine_rule: str = "recurrent-plus-neighbors"
    checks: tuple = DEFAULT_CHECKS
    mode: str = "sampled+lipschitz-pad"
    samples_per_axis: Optional[int] = None
    override_trapping: bool = False
    nw_schedule: Optional[tuple] = None
    sigma_triples: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.depth_start <= self.depth_max:
            raise ConfigurationError("need 0 <= depth_start <= depth_max")
        if self.epsilon_rule not in ("box-diameter", "fixed"):
            raise ConfigurationError(f"unknown epsilon rule {self.epsilon_rule!r}")
        if self.epsilon_rule == "fixed" and not (self.epsilon_value or 0) > 0:
            raise ConfigurationError("fixed epsilon must be positive")
        if self.refine_rule not in ("recurrent-plus-neighbors", "all"):
            raise ConfigurationError(f"unknown refine rule {self.refine_rule!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ConfigurationError(f"unknown checks {sorted(unknown)}")
        object.__setattr__(self, "checks", tuple(self.checks))
        if self.nw_schedule is not None:
            object.__setattr__(self, "nw_schedule", tuple(float(e) for e in self.nw_schedule))

    def epsilon_at(self, cover: BoxCover) -> float:
        return cover.cell_diameter if self.epsilon_rule == "box-diameter" else float(self.epsilon_value)

    def to_dict(self) -> dict:
        out = {
            "system": self.system.to_dict(),
            "depth_start": self.depth_start,
            "depth_max": self.depth_max,
            "epsilon_rule": self.epsilon_rule,
            "refine_rule": self.refine_rule,
            "checks": list(self.checks),
            "mode": self.mode,
        }
        if self.epsilon_value is not None:
            out["epsilon_value"] = self.epsilon_value
        if self.samples_per_axis is not None:
            out["samples_per_axis"] = self.samples_per_axis
        if self.override_trapping:
            out["override_trapping"] = True
        if self.nw_schedule is not None:
            out["nw_schedule"] = list(self.nw_schedule)
        if self.sigma_triples != 100:
            out["sigma_triples"] = self.sigma_triples
        if self.seed:
            out["seed"] = self.seed
        return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: object = None
    missing: bool = False

    def __bool__(self) -> bool:
        return self.passed


@dataclass
class DepthEntry:
    depth: int
    epsilon: float
    box_count: int
    stream: StreamGraph
    recurrent_codes: np.ndarray = field(repr=False)
    wall_time: float = 0.0


@dataclass(eq=False)
class AnalysisReport:
    config: AnalysisConfig
    depths: list
    stream: StreamGraph
    graph: Optional[TransitionGraph] = field(default=None, repr=False)
    lyapunov: Optional[LyapunovAssignment] = field(default=None, repr=False)
    nw: Optional[NwGraph] = None
    collapsed: Optional[StreamGraph] = None
    checks: dict = field(default_factory=dict)
    corridor_layers: int = 1

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def _corridor(graph: TransitionGraph, rec: np.ndarray) -> np.ndarray:
    """Boxes lying on chains that start and end at recurrent boxes."""
    pos = np.flatnonzero(rec)
    if len(pos) == 0:
        return pos
    down = downstream_positions(graph, pos)
    up = upstream_positions(graph, pos)
    return np.intersect1d(down, up)


def _stage(config: AnalysisConfig, cover: BoxCover):
    eps = config.epsilon_at(cover)
    graph = build_transition_graph(config.system, cover, eps, config.mode, config.samples_per_axis)
    part = recurrent_components(graph)
    dag = condense(graph, part)
    prov = {"depth": cover.depth, "epsilon": eps, "system_hash": config.system.hash}
    return graph, part, dag, stream_graph(dag, part, prov)


def analyze(config: AnalysisConfig) -> AnalysisReport:
    """Adaptive refinement from ``depth_start`` to ``depth_max``.

    Between depths the cover keeps the recurrent boxes, every box on a chain
    between recurrent boxes and one layer of touching neighbours, then
    subdivides.
    """
    system = config.system
    region = analysis_region(system)
    if not config.override_trapping:
        chk = verify_trapping(system, region, depth=min(10, max(1, 18 // system.dimension)))
        if not chk.ok:
            raise TrappingViolation(f"analysis region is not forward invariant: {chk.witness} -> {chk.image}",
                                    witness=chk.witness)
    cover = full_cover(region, config.depth_start)
    entries = []
    for depth in range(config.depth_start, config.depth_max + 1):
        t0 = time.perf_counter()
        graph, part, dag, sg = _stage(config, cover)
        rec = part.node_of >= 0
        entries.append(DepthEntry(depth, graph.epsilon, len(cover), sg, cover.codes[rec],
                                  time.perf_counter() - t0))
        log.info("depth %d: %d boxes, %d nodes", depth, len(cover), sg.node_count)
        if depth == config.depth_max:
            break
        if config.refine_rule == "all":
            keep = np.arange(len(cover))
        else:
            keep = touching_neighbors(cover, np.union1d(np.flatnonzero(rec), _corridor(graph, rec)))
        if len(keep) == 0:
            keep = np.arange(len(cover))
        cover = subdivide(cover, keep)
    lyap = synthesize_lyapunov(sg, dag)
    report = AnalysisReport(config, entries, sg, graph, lyap)
    if config.nw_schedule is not None:
        report.nw = nw_graph(system, sg, config.nw_schedule)
        report.collapsed, _ = collapse_loops(report.nw)
    report.checks = verify(report, config.checks)
    return report


# checks ------------------------------------------------------------------------

def _edges_adjacency(sg: StreamGraph) -> Adjacency:
    e = np.array(sg.edges, dtype=np.int64).reshape(-1, 2)
    k = max(sg.node_count, int(e.max()) + 1 if len(e) else 0)
    return Adjacency.from_pairs(k, e[:, 0], e[:, 1])


def check_acyclic(sg: StreamGraph) -> CheckResult:
    try:
        topological_levels(_edges_adjacency(sg))
    except CycleDetected as exc:
        return CheckResult("acyclic", False, exc.cycle)
    return CheckResult("acyclic", True)


def check_transitive(sg: StreamGraph) -> CheckResult:
    m = sg.matrix()
    two = (m.astype(np.int64) @ m.astype(np.int64)) > 0
    bad = np.argwhere(two & ~m)
    return CheckResult("transitive", len(bad) == 0, [tuple(map(int, b)) for b in bad[:5]] or None)


def check_tower(sg: StreamGraph) -> CheckResult:
    if is_tower(sg):
        return CheckResult("tower", True)
    m = sg.matrix()
    k = len(m)
    pair = next((i, j) for i in range(k) for j in range(i + 1, k) if not (m[i, j] or m[j, i]))
    return CheckResult("tower", False, pair)


def check_top_bottom(sg: StreamGraph) -> CheckResult:
    m = sg.matrix()
    for k in range(sg.node_count):
        chain = maximal_tower_through(sg, k)
        if m[:, chain[0]].any() or m[chain[-1]].any():
            return CheckResult("top-bottom", False, {"node": k, "tower": chain})
    return CheckResult("top-bottom", True)


def check_lyapunov_valid(report: AnalysisReport) -> CheckResult:
    if report.lyapunov is None or report.graph is None:
        raise MissingArtifact("lyapunov-valid needs a Lyapunov assignment and the transition graph")
    res = check_lyapunov(report.graph, report.stream, report.lyapunov)
    witness = None if res.ok else {"edges": res.edge_violations[:5], "stream": res.stream_violations[:5]}
    return CheckResult("lyapunov-valid", res.ok, witness)


def f_vs_f2(graph: TransitionGraph) -> dict:
    """Recurrent boxes of F against those of F^2 together with orbit edges."""
    n = graph.n
    r1 = recurrent_mask(n, chain_matrix(graph))
    s2 = compose_step(graph, 2)
    r2 = recurrent_mask(n, chain_relation(n, s2, graph.jump, graph.step))
    out = {"f": r1, "f2": r2, "layer": 0}
    cover = graph.cover
    d = 0
    for a, b in ((r1, r2), (r2, r1)):
        extra = np.flatnonzero(a & ~b)
        if len(extra) == 0:
            continue
        if not b.any():
            d = max(d, cover.cells_per_axis)
            continue
        # Chebyshev cell distance from each extra box to the other set
        ia = cover.indices(extra)
        ib = cover.indices(np.flatnonzero(b))
        for row in ia:
            diff = np.abs(ib - row)
            per = cover.root.periodic
            diff[:, per] = np.minimum(diff[:, per], cover.cells_per_axis - diff[:, per])
            d = max(d, int(diff.max(axis=1).min()))
    out["layer"] = d
    return out


def check_f_vs_f2(report: AnalysisReport) -> CheckResult:
    if report.graph is None:
        raise MissingArtifact("f-vs-f2 needs the transition graph")
    res = f_vs_f2(report.graph)
    ok = res["layer"] <= 1
    return CheckResult("f-vs-f2", ok, None if ok else {"layer": res["layer"]})


def refinement_nesting_check(report: AnalysisReport) -> bool:
    """Every recurrent box's parent is recurrent, or touches a recurrent box, one depth up."""
    if report.config.mode == "sampled":
        raise ModeUnsupported("nesting is only guaranteed with Lipschitz padding")
    root = analysis_region(report.config.system)
    for a, b in zip(report.depths, report.depths[1:]):
        if len(b.recurrent_codes) == 0:
            continue
        if len(a.recurrent_codes) == 0:
            return False
        parents = parent_codes(b.recurrent_codes, b.depth, root.dimension)
        allowed = _neighbour_codes(BoxCover(root, a.depth, a.recurrent_codes))
        if not np.isin(parents, allowed).all():
            return False
    return True


def _neighbour_codes(cover: BoxCover) -> np.ndarray:
    """Codes of all cells, active or not, touching an active cell (inclusive)."""
    idx = cover.indices()
    n = cover.cells_per_axis
    per = cover.root.periodic
    out = []
    for off in itertools.product((-1, 0, 1), repeat=cover.dimension):
        j = idx + np.array(off)
        j[:, per] %= n
        ok = ((j >= 0) & (j < n)).all(axis=1)
        out.append(pack(j[ok], cover.depth))
    return np.unique(np.concatenate(out))


def check_nesting(report: AnalysisReport) -> CheckResult:
    try:
        ok = refinement_nesting_check(report)
    except ModeUnsupported as exc:
        return CheckResult("nesting", False, str(exc), missing=True)
    return CheckResult("nesting", ok)


def check_sigma_triangle(report: AnalysisReport, triples: Optional[int] = None, seed: Optional[int] = None) -> CheckResult:
    if report.graph is None:
        raise MissingArtifact("sigma-triangle needs the transition graph")
    g = report.graph
    triples = report.config.sigma_triples if triples is None else triples
    rng = np.random.default_rng(report.config.seed if seed is None else seed)
    abc = rng.integers(0, g.n, size=(triples, 3))
    src = np.unique(abc[:, :2])
    d = sigma_costs_from(g, src)
    row = {int(s): i for i, s in enumerate(src)}
    for a, b, c in abc:
        dac = d[row[int(a)], c]
        dab = d[row[int(a)], b]
        dbc = d[row[int(b)], c]
        if dac > dab + dbc + 1e-9:
            return CheckResult("sigma-triangle", False, {"a": int(a), "b": int(b), "c": int(c),
                                                         "ac": float(dac), "ab": float(dab), "bc": float(dbc)})
    return CheckResult("sigma-triangle", True)


def verify(report: AnalysisReport, suite: Sequence[str] = CHECKS) -> dict:
    """Run named checks; a check whose inputs are absent is reported as missing."""
    out = {}
    sg = report.stream
    for name in suite:
        try:
            if name == "acyclic":
                res = check_acyclic(sg)
            elif name == "connected":
                c = check_connected(sg)
                res = CheckResult("connected", c.ok, c.witness)
            elif name == "tower":
                res = check_tower(sg)
            elif name == "top-bottom":
                res = check_top_bottom(sg)
            elif name == "transitive":
                res = check_transitive(sg)
            elif name == "lyapunov-valid":
                res = check_lyapunov_valid(report)
            elif name == "f-vs-f2":
                res = check_f_vs_f2(report)
            elif name == "nesting":
                res = check_nesting(report)
            elif name == "sigma-triangle":
                res = check_sigma_triangle(report)
            else:
                raise ConfigurationError(f"unknown check {name!r}")
        except MissingArtifact as exc:
            res = CheckResult(name, False, str(exc), missing=True)
        out[name] = res
    return out


# sweeps ------------------------------------------------------------------------

@dataclass
class SweepRow:
    mu: float
    node_count: Optional[int] = None
    is_tower: Optional[bool] = None
    connected: Optional[bool] = None
    classifications: tuple = ()
    error: Optional[str] = None


def _sweep_one(args):
    mu, template = args
    try:
        cfg = replace(template, system=logistic(mu))
        rep = analyze(cfg)
        sg = rep.stream
        row = SweepRow(mu, sg.node_count, is_tower(sg), check_connected(sg).ok, tuple(sg.classes()))
        rep.graph = None  # keep the pickled result small
        rep.lyapunov = None
        return rep, row
    except (StreamlabError, ValueError, ArithmeticError) as exc:
        return None, SweepRow(mu, error=f"{type(exc).__name__}: {exc}")


def bifurcation_sweep(mu_values: Sequence[float], template: AnalysisConfig, threads: int = 1,
                      family: str = "logistic"):
    """One analysis per parameter value; errors are recorded per row.

    Returns ``(reports, rows)`` sorted by ``mu``; failed values have report ``None``.
    """
    if family != "logistic":
        raise ConfigurationError("only the logistic family is supported")
    if threads < 1:
        raise ConfigurationError("threads must be at least 1")
    for mu in mu_values:
        if not 0.0 <= mu <= 4.0:
            raise ConfigurationError(f"mu={mu} outside [0, 4]")
    mus = sorted(float(m) for m in mu_values)
    jobs = [(mu, template) for mu in mus]
    if threads == 1 or len(jobs) <= 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_one, jobs))
    return [r for r, _ in results], [row for _, row in results]
