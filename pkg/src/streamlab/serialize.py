"""JSON reports, DOT drawings and JSON analysis configs.

Reports are written with sorted keys and floats at 17 significant digits so
that identical analyses give byte-identical files when wall times are left
out (``reproducible=True``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .boxcover import Box, BoxCover, hull, pack, unpack
from .errors import ConfigurationError
from .nonwandering import NwGraph
from .pipeline import AnalysisConfig, AnalysisReport, CheckResult
from .streamgraph import NodeInfo, StreamGraph, classify, reduce_closed, transitive_closure
from .systems import analysis_region, system_from_dict

SCHEMA_VERSION = "1"


# emitting ---------------------------------------------------------------------

def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _fmt(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        text = "%.17g" % obj
        if "." not in text and "e" not in text and "n" not in text:
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_fmt(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _fmt(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items())
        return "{\n" + ",\n".join(f"{pad}{json.dumps(k)}: {_fmt(v, indent, level + 1)}" for k, v in items) \
            + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _fmt(_plain(obj), indent, 0) + "\n"


def _box_dict(box: Optional[Box]):
    if box is None:
        return None
    return {"lo": list(box.lo), "hi": list(box.hi)}


def _node_dict(sg: StreamGraph, nd: NodeInfo, lyap=None, with_boxes: bool = True) -> dict:
    out = {"id": nd.id, "classification": nd.classification, "box_count": nd.cardinality,
           "hull": _box_dict(nd.hull)}
    if lyap is not None:
        out["lyapunov_value"] = float(lyap[nd.id])
    if with_boxes and sg.cover is not None:
        out["boxes"] = {"depth": sg.cover.depth, "indices": sg.cover.indices(nd.boxes).tolist()}
    return out


def _graph_dict(sg: StreamGraph, lyap=None, with_boxes: bool = True) -> dict:
    return {
        "nodes": [_node_dict(sg, nd, lyap, with_boxes) for nd in sg.nodes],
        "edges": [list(e) for e in sg.edges],
        "reduced_edges": [list(e) for e in sg.reduced_edges],
    }


def _check_dict(res: CheckResult) -> dict:
    out = {"pass": bool(res.passed)}
    if res.witness is not None:
        out["witness"] = res.witness
    if res.missing:
        out["missing"] = True
    return out


def nw_dict(nw: NwGraph) -> dict:
    return {
        "nodes": [{"id": i, "kind": k, "seed": int(s), "points": list(map(float, np.atleast_1d(p)))}
                  for i, (p, k, s) in enumerate(zip(nw.nodes, nw.kinds, nw.seeds))],
        "edges": [list(e) for e in nw.edges],
        "epsilon_used": nw.epsilon_used,
        "schedule": list(nw.schedule),
        "notes": nw.notes,
    }


def report_dict(report: AnalysisReport, reproducible: bool = True) -> dict:
    sg = report.stream
    lyap = report.lyapunov.node_values if report.lyapunov is not None else None
    depths = []
    for e in report.depths:
        d = {"depth": e.depth, "epsilon": e.epsilon, "box_count": e.box_count,
             "node_count": e.stream.node_count, **_graph_dict(e.stream, None, with_boxes=False)}
        if not reproducible:
            d["wall_time"] = e.wall_time
        depths.append(d)
    out = {
        "schema_version": SCHEMA_VERSION,
        "system": report.config.system.to_dict(),
        "config": report.config.to_dict(),
        "depths": depths,
        **_graph_dict(sg, lyap),
        "checks": {k: _check_dict(v) for k, v in report.checks.items()},
        "corridor_layers": report.corridor_layers,
    }
    if report.nw is not None:
        out["nw"] = nw_dict(report.nw)
    if report.collapsed is not None:
        out["collapsed"] = {"nodes": [{"id": nd.id, "classification": nd.classification,
                                       "members": list(map(int, nd.boxes))} for nd in report.collapsed.nodes],
                            "edges": [list(e) for e in report.collapsed.edges],
                            "reduced_edges": [list(e) for e in report.collapsed.reduced_edges]}
    return out


def emit_json(report: AnalysisReport, reproducible: bool = True) -> str:
    return dumps(report_dict(report, reproducible))


# parsing ----------------------------------------------------------------------

@dataclass
class ParsedReport:
    data: dict
    stream: StreamGraph
    checks: dict = field(default_factory=dict)

    @property
    def system(self):
        return system_from_dict(self.data["system"])


def graph_from_dict(data: dict, root: Optional[Box] = None, provenance: Optional[dict] = None) -> StreamGraph:
    """Rebuild a stream graph; edges are taken as given, without validation."""
    nodes_in = data.get("nodes", [])
    cover = None
    codes_per_node = []
    if root is not None and nodes_in and all("boxes" in n for n in nodes_in):
        depth = nodes_in[0]["boxes"]["depth"]
        for n in nodes_in:
            idx = np.asarray(n["boxes"]["indices"], dtype=np.int64).reshape(-1, root.dimension)
            codes_per_node.append(pack(idx, depth) if len(idx) else np.zeros(0, np.int64))
        allc = np.concatenate(codes_per_node) if codes_per_node else np.zeros(0, np.int64)
        if len(allc):
            cover = BoxCover(root, depth, allc)
    nodes = []
    for i, n in enumerate(nodes_in):
        h = n.get("hull")
        box = Box(tuple(h["lo"]), tuple(h["hi"])) if h else None
        pos = cover.positions_of_codes(codes_per_node[i]) if cover is not None else np.zeros(0, np.int64)
        nodes.append(NodeInfo(int(n["id"]), pos, box, n.get("classification", ""), int(n.get("box_count", len(pos)))))
    edges = [tuple(map(int, e)) for e in data.get("edges", [])]
    reduced = [tuple(map(int, e)) for e in data.get("reduced_edges", [])]
    return StreamGraph(nodes, edges, reduced, dict(provenance or {}), cover)


def parse_report(text: str) -> ParsedReport:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"report is not valid JSON: {exc}") from None
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError("unsupported report schema version")
    try:
        root = analysis_region(system_from_dict(data["system"]))
    except (ConfigurationError, KeyError):
        root = None
    sg = graph_from_dict(data, root)
    checks = {k: CheckResult(k, bool(v["pass"]), v.get("witness"), bool(v.get("missing", False)))
              for k, v in data.get("checks", {}).items()}
    return ParsedReport(data, sg, checks)


def graph_signature(sg: StreamGraph) -> tuple:
    """Hashable summary used to compare graphs across a round trip."""
    nodes = []
    for nd in sg.nodes:
        codes = tuple(sg.cover.codes[nd.boxes].tolist()) if sg.cover is not None else ()
        nodes.append((nd.id, nd.classification, nd.cardinality, codes))
    return tuple(nodes), tuple(sorted(sg.edges)), tuple(sorted(sg.reduced_edges))


# DOT --------------------------------------------------------------------------

SHAPES = {"top": "circle", "interior": "diamond", "bottom": "square", "isolated": "square"}


def _nw_drawing(nw: NwGraph):
    k = nw.node_count
    e = np.array(nw.edges, dtype=np.int64).reshape(-1, 2)
    m = sp.csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(k, k))
    _, lab = connected_components(m, directed=True, connection="strong")
    dag = {(int(lab[a]), int(lab[b])) for a, b in nw.edges if lab[a] != lab[b]}
    ncomp = int(lab.max()) + 1 if k else 0
    keep = set(reduce_closed(ncomp, transitive_closure(ncomp, dag)))
    drawn = [(a, b) for a, b in nw.edges if lab[a] == lab[b] or (int(lab[a]), int(lab[b])) in keep]
    # an arrow entering a loop goes to its saddles when there are any
    into = {}
    for a, b in drawn:
        if lab[a] != lab[b]:
            into.setdefault((a, int(lab[b])), []).append(b)
    for (a, _), targets in into.items():
        saddles = [b for b in targets if nw.kinds[b] != "attractor"]
        if saddles and len(saddles) < len(targets):
            drawn = [e for e in drawn if not (e[0] == a and e[1] in targets and e[1] not in saddles)]
    ins = {b for _, b in nw.edges}
    shapes = []
    for i in range(k):
        if nw.kinds[i] == "attractor":
            shapes.append("square")
        else:
            shapes.append("diamond" if i in ins else "circle")
    labels = [f"{nw.kinds[i]} [{nw.hull(i)[0]:.4g}, {nw.hull(i)[1]:.4g}]" for i in range(k)]
    return shapes, labels, sorted(drawn)


def emit_dot(graph: Union[StreamGraph, NwGraph], name: str = "stream") -> str:
    """DOT digraph: circles for top nodes, diamonds for interior, squares for bottom.

    Stream graphs draw only their reduced edges; NW graphs keep every edge
    inside a loop (so 2-cycles show as paired arrows) and the reduced edges
    between loops.
    """
    if isinstance(graph, NwGraph):
        shapes, labels, edges = _nw_drawing(graph)
    else:
        shapes = [SHAPES.get(nd.classification, "ellipse") for nd in graph.nodes]
        labels = []
        for nd in graph.nodes:
            if nd.hull is not None:
                lo = ",".join(f"{v:.4g}" for v in nd.hull.lo)
                hi = ",".join(f"{v:.4g}" for v in nd.hull.hi)
                labels.append(f"{nd.classification} [{lo}] .. [{hi}]")
            else:
                labels.append(nd.classification)
        edges = sorted(graph.reduced_edges)
    lines = [f"digraph {name} {{"]
    for i, (shape, label) in enumerate(zip(shapes, labels)):
        lines.append(f'  n{i} [shape={shape}, label="{i}: {label}"];')
    for a, b in edges:
        lines.append(f"  n{a} -> n{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# configs ----------------------------------------------------------------------

_CONFIG_KEYS = {"system", "depth_start", "depth_max", "epsilon_rule", "refine_rule", "checks", "mode",
                "samples_per_axis", "override_trapping", "nw_schedule", "sigma_triples", "seed",
                "mu_values", "epsilon_value"}


def config_from_dict(data: dict) -> tuple:
    """Returns ``(AnalysisConfig, extras)`` where extras holds sweep settings."""
    if not isinstance(data, dict) or "system" not in data:
        raise ConfigurationError("config needs a 'system' entry")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
    try:
        system = system_from_dict(data["system"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad system entry: {exc}") from None
    rule = data.get("epsilon_rule", "box-diameter")
    eps_value = data.get("epsilon_value")
    if isinstance(rule, dict):
        if set(rule) != {"fixed"}:
            raise ConfigurationError("epsilon_rule must be 'box-diameter' or {'fixed': value}")
        rule, eps_value = "fixed", float(rule["fixed"])
    kwargs = {k: data[k] for k in ("depth_start", "depth_max", "refine_rule", "mode", "samples_per_axis",
                                   "override_trapping", "nw_schedule", "sigma_triples", "seed") if k in data}
    if "checks" in data:
        kwargs["checks"] = tuple(data["checks"])
    cfg = AnalysisConfig(system, epsilon_rule=rule, epsilon_value=eps_value, **kwargs)
    extras = {}
    if "mu_values" in data:
        mv = data["mu_values"]
        if isinstance(mv, dict):
            mv = np.linspace(float(mv["start"]), float(mv["stop"]), int(mv["count"])).tolist()
        extras["mu_values"] = [float(v) for v in mv]
    return cfg, extras


def load_config(path) -> tuple:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {p} is not valid JSON: {exc}") from None
    return config_from_dict(data)
