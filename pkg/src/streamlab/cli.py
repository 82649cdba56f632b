"""Command line front end: ``python -m streamlab <command> ...``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import serialize
from .errors import (ConfigurationError, CycleDetected, InsufficientSeparation, NumericError,
                     StreamlabError, TrappingViolation)
from .pipeline import CHECKS, AnalysisReport, analyze, bifurcation_sweep, verify

GRAPH_CHECKS = ("acyclic", "connected", "top-bottom", "transitive")


def _write_outputs(report: AnalysisReport, out: Path, fmt: str, reproducible: bool, stem: str = "") -> list:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        p = out / f"{stem}report.json"
        p.write_text(serialize.emit_json(report, reproducible))
        written.append(p)
    if fmt in ("dot", "both"):
        p = out / f"{stem}graph.dot"
        p.write_text(serialize.emit_dot(report.stream))
        written.append(p)
        if report.nw is not None:
            p = out / f"{stem}nw.dot"
            p.write_text(serialize.emit_dot(report.nw, name="nw"))
            written.append(p)
    return written


def _print_checks(checks: dict) -> bool:
    ok = True
    for name, res in checks.items():
        state = "missing" if res.missing else ("pass" if res.passed else "FAIL")
        line = f"{name:16s} {state}"
        if not res.passed and not res.missing and res.witness is not None:
            line += f"  witness={res.witness}"
        print(line)
        ok &= res.passed or res.missing
    return ok


def cmd_analyze(args) -> int:
    cfg, _ = serialize.load_config(args.config)
    report = analyze(cfg)
    for p in _write_outputs(report, Path(args.out), args.format, args.reproducible):
        print(f"wrote {p}")
    _print_checks(report.checks)
    return 0


def cmd_bifurcate(args) -> int:
    cfg, extras = serialize.load_config(args.config)
    if "mu_values" not in extras:
        raise ConfigurationError("bifurcate needs 'mu_values' in the config")
    reports, rows = bifurcation_sweep(extras["mu_values"], cfg, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for i, (rep, row) in enumerate(zip(reports, rows)):
        summary.append({"mu": row.mu, "node_count": row.node_count, "is_tower": row.is_tower,
                        "connected": row.connected, "classifications": list(row.classifications),
                        "error": row.error})
        if rep is not None:
            _write_outputs(rep, out, args.format, args.reproducible, stem=f"{i:03d}_")
        flag = row.error or f"{row.node_count} nodes, tower={row.is_tower}"
        print(f"mu={row.mu:.6f}  {flag}")
    (out / "summary.json").write_text(serialize.dumps({"rows": summary}))
    return 0


def _report_from_file(path) -> AnalysisReport:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read report {path}: {exc.strerror}") from None
    parsed = serialize.parse_report(text)
    cfg, _ = serialize.config_from_dict(parsed.data["config"])
    return AnalysisReport(cfg, [], parsed.stream)


def cmd_verify(args) -> int:
    if args.report:
        report = _report_from_file(args.report)
        suite = args.checks or GRAPH_CHECKS
    elif args.config:
        cfg, _ = serialize.load_config(args.config)
        report = analyze(cfg)
        suite = args.checks or CHECKS
    else:
        raise ConfigurationError("verify needs --report or --config")
    checks = verify(report, suite)
    return 0 if _print_checks(checks) else 1


def cmd_export(args) -> int:
    if not args.report:
        raise ConfigurationError("export needs --report")
    text = Path(args.report).read_text() if Path(args.report).exists() else None
    if text is None:
        raise ConfigurationError(f"cannot read report {args.report}")
    parsed = serialize.parse_report(text)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format in ("dot", "both"):
        (out / "graph.dot").write_text(serialize.emit_dot(parsed.stream))
        print(f"wrote {out / 'graph.dot'}")
    if args.format in ("json", "both"):
        (out / "report.json").write_text(serialize.dumps(parsed.data))
        print(f"wrote {out / 'report.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="analysis config (JSON)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("json", "dot", "both"), default="both")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--reproducible", action="store_true", help="omit wall times from reports")
    sub.add_parser("analyze", parents=[common], help="run an analysis and write report.json / graph.dot")
    sub.add_parser("bifurcate", parents=[common], help="sweep mu over the logistic family")
    v = sub.add_parser("verify", parents=[common], help="run checks on a report or a fresh analysis")
    v.add_argument("--report", help="existing report.json")
    v.add_argument("--checks", nargs="+", choices=CHECKS)
    e = sub.add_parser("export", parents=[common], help="convert a report to DOT or canonical JSON")
    e.add_argument("--report", help="existing report.json")
    return parser


COMMANDS = {"analyze": cmd_analyze, "bifurcate": cmd_bifurcate, "verify": cmd_verify, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("analyze", "bifurcate") and not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (TrappingViolation, CycleDetected, InsufficientSeparation) as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except StreamlabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
