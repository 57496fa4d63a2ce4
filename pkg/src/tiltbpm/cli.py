"""Command-line entry point: ``tiltbpm <subcommand> ...``.

Exit codes: 0 success, 1 lint findings or conformance deviations, 2 errors.
Machine output goes to stdout (or ``--out``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .bpmn import read_bpmn, serialize_bpmn
from .conformance import ConformanceReport, annotate_diagram, check, extract_normative
from .discovery import build_dfg, inductive_mine, tree_to_bpmn
from .errors import TiltBpmError
from .eventlog import IngestResult, read_log
from .export import export_tilt
from .lint import LintConfig, autofix, lint
from .simulate import SimulationConfig, simulate

CONFIG_ENV = "TILTBPM_CONFIG"
PROG = "tiltbpm"


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _warn(msg: str) -> None:
    print(f"{PROG}: {msg}", file=sys.stderr)


def _lint_config(args) -> LintConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    config = LintConfig.load(path) if path else LintConfig()
    if config.timestamp is None and os.environ.get("SOURCE_DATE_EPOCH"):
        epoch = int(os.environ["SOURCE_DATE_EPOCH"])
        config.timestamp = datetime.fromtimestamp(epoch, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return config


def _load_log(path: str) -> IngestResult:
    result = read_log(path)
    for reject in result.rejects:
        _warn(f"{path}: rejected {reject}")
    return result


def cmd_lint(args) -> int:
    model = read_bpmn(args.model)
    findings = lint(model, config=_lint_config(args))
    if args.format == "json":
        _write(json.dumps([f.to_dict() for f in findings], indent=2) + "\n", args.out)
    else:
        lines = [
            f"{f.severity.value.upper():7} {f.rule_id:28} {f.element_id}: {f.message}"
            + (" [fixable]" if f.fixable else "")
            for f in findings
        ]
        _write("".join(line + "\n" for line in lines), args.out)
    return 1 if findings else 0


def cmd_fix(args) -> int:
    model = read_bpmn(args.model)
    config = _lint_config(args)
    findings = lint(model, config=config)
    fixed = autofix(model, findings)
    applied = sum(1 for f in findings if f.fixable)
    _warn(f"applied {applied} fix(es)")
    _write(serialize_bpmn(fixed), args.out)
    return 0


def cmd_export(args) -> int:
    _write(export_tilt(read_bpmn(args.model)).to_json(), args.out)
    return 0


def cmd_simulate(args) -> int:
    model = read_bpmn(args.model)
    config = SimulationConfig.load(args.config) if args.config else SimulationConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.traces is not None:
        overrides["trace_count"] = args.traces
    if overrides:
        config = dataclasses.replace(config, **overrides)
    text = "".join(line + "\n" for line in simulate(model, config))
    _write(text, args.out)
    return 0


def cmd_discover(args) -> int:
    log = _load_log(args.log).log
    dfg = build_dfg(log)
    if args.format == "dot":
        _write(dfg.to_dot(), args.out)
        return 0
    model = tree_to_bpmn(inductive_mine(log))
    _write(serialize_bpmn(model), args.out)
    if args.dot:
        Path(args.dot).write_text(dfg.to_dot(), encoding="utf-8", newline="\n")
    return 0


def cmd_check(args) -> int:
    normative_model = read_bpmn(args.model)
    log = _load_log(args.log).log
    report = check(extract_normative(normative_model), log)
    rendered = report.render_text() if args.format == "text" else report.to_json()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
        normative = annotate_diagram(normative_model, report)
        (out / "normative.bpmn").write_text(serialize_bpmn(normative), encoding="utf-8",
                                            newline="\n")
        if log.traces:
            discovered = annotate_diagram(tree_to_bpmn(inductive_mine(log)), report,
                                          attach_observed=True)
            (out / "discovered.bpmn").write_text(serialize_bpmn(discovered), encoding="utf-8",
                                                 newline="\n")
        s = report.summary
        _warn(f"{s['conforming']} conforming, {s['missing']} missing, "
              f"{s['undeclared']} undeclared; outputs in {out}")
    else:
        sys.stdout.write(rendered)
    return 1 if report.has_deviations else 0


def cmd_report(args) -> int:
    report = ConformanceReport.from_dict(json.loads(Path(args.report).read_text(encoding="utf-8")))
    text = report.to_json() if args.format == "json" else report.render_text()
    _write(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Transparency-aware BPMN tooling.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, model=True, fmt=None, out_help="output path (stdout when omitted)"):
        p = sub.add_parser(name, help=help_)
        if model:
            p.add_argument("--model", required=True, help="BPMN 2.0 XML file")
        p.add_argument("--out", help=out_help)
        if fmt:
            p.add_argument("--format", choices=fmt, default=fmt[0])
        p.set_defaults(func=func)
        return p

    p = add("lint", cmd_lint, "check TILT annotations against the lint rules", fmt=["text", "json"])
    p.add_argument("--config", help=f"lint config (JSON or TOML); default ${CONFIG_ENV}")
    p = add("fix", cmd_fix, "apply every available auto-fix and write the model")
    p.add_argument("--config", help=f"lint config (JSON or TOML); default ${CONFIG_ENV}")
    add("export-tilt", cmd_export, "write the TILT JSON document of a model")
    p = add("simulate", cmd_simulate, "generate a transparency event log from a model")
    p.add_argument("--config", help="simulation config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--traces", type=int)
    p = add("discover", cmd_discover, "mine a BPMN model from an event log", model=False,
            fmt=["bpmn", "dot"])
    p.add_argument("--log", required=True, help="JSON-lines event log")
    p.add_argument("--dot", help="also write the directly-follows graph as DOT here")
    p = add("check", cmd_check, "compare modeled and logged data disclosures",
            fmt=["json", "text"],
            out_help="directory for report.json and the annotated diagrams "
                     "(report to stdout when omitted)")
    p.add_argument("--log", required=True, help="JSON-lines event log")
    p = add("report", cmd_report, "render a conformance report", model=False,
            fmt=["text", "json"])
    p.add_argument("--report", required=True, help="report JSON written by check")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (TiltBpmError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"{PROG}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
