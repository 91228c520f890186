"""Command-line entry point: ``python -m src.cli <command>``.

Exit codes: 0 = finished with no covered path, 1 = covered paths exist,
2 = errors or unknown verdicts.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from src.config.settings import settings
from src.diagnostics import LeakcoverError
from src.hdl.loader import load_rtl
from src.ifa.labels import load_target_config, resolve_labels
from src.ifa.paths import enumerate_paths, export_paths
from src.pipeline.report import compare_modes, load_report, render_records, render_table
from src.pipeline.runner import run, run_modes
from src.properties.blocks import build_property
from src.properties.psl import write_properties
from src.schemas.report import Report
from src.schemas.run import ESCALATION, MODE_CHAIN, Limits, Mode, RunConfig
from src.software.assembler import load_any
from src.software.assumptions import assumption_psl, assumptions_for, write_assumptions

logger = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_COVERED = 1
EXIT_ERROR = 2


def _limits(args) -> Limits:
    overrides = {
        name: getattr(args, name, None)
        for name in ("max_paths", "max_edges", "max_k", "induction_depth", "explicit_state_bits", "call_stack_depth")
    }
    return Limits(**{k: v for k, v in overrides.items() if v is not None})


def _config(args, mode: Optional[Mode] = None, output_dir: Optional[str] = None) -> RunConfig:
    return RunConfig(
        target=args.target,
        program=args.program,
        program_meta=args.meta,
        trigger=args.trigger,
        mode=mode or Mode(args.mode),
        limits=_limits(args),
        parallelism=args.parallelism or settings.parallelism,
        output_dir=output_dir,
        dump_cnf=getattr(args, "dump_cnf", False),
        select=getattr(args, "select", None) or [],
    )


def exit_code(reports: Sequence[Report]) -> int:
    if any(r.incomplete for r in reports):
        return EXIT_ERROR
    if any(r.summary.covered for r in reports):
        return EXIT_COVERED
    if any(r.summary.unknown for r in reports):
        return EXIT_ERROR
    return EXIT_CLEAN


# --- commands ---


def cmd_paths(args) -> int:
    target = load_target_config(args.target)
    netlist, _ = load_rtl(target.rtl, target.top)
    labels = resolve_labels(target, netlist)
    limits = _limits(args)
    paths = enumerate_paths(netlist, labels, limits.max_paths, limits.max_edges)
    for p in paths:
        print(f"{p.id}  {p.source} -> {p.sink}  ({len(p.edges)} edges, {p.conditional_edges} conditional)  {p.describe()}")
    if paths.limited:
        print("(path list is partial: enumeration limits reached)")
    if args.out:
        export_paths(paths, args.out)
    return EXIT_CLEAN


def cmd_props(args) -> int:
    target = load_target_config(args.target)
    netlist, _ = load_rtl(target.rtl, target.top)
    labels = resolve_labels(target, netlist)
    limits = _limits(args)
    paths = enumerate_paths(netlist, labels, limits.max_paths, limits.max_edges)
    manifest = write_properties([build_property(p, netlist) for p in paths], args.out)
    print(manifest)
    return EXIT_CLEAN


def cmd_assume(args) -> int:
    target = load_target_config(args.target)
    netlist, _ = load_rtl(target.rtl, target.top)
    program = load_any(args.program, args.meta, args.trigger) if args.program else None
    mode = Mode(args.mode)
    modes = ESCALATION if mode == Mode.FULL else (mode,)
    for m in modes:
        aset = assumptions_for(m, netlist, target.core, program, _limits(args).call_stack_depth)
        out = Path(args.out) / f"{m.value}.psl" if args.out else None
        if out:
            write_assumptions(aset, out)
            print(out)
        else:
            print(assumption_psl(aset), end="")
    return EXIT_CLEAN


def cmd_check(args) -> int:
    report = run(_config(args))
    print(render_records(report), end="")
    print(render_table([report]), end="")
    return exit_code([report])


def cmd_run(args) -> int:
    out = args.out or settings.output_dir
    if args.mode == "chain":
        reports = run_modes(_config(args, Mode.NONE, out), MODE_CHAIN if args.program else MODE_CHAIN[:2])
    else:
        reports = [run(_config(args, output_dir=out))]
    print(render_table(reports), end="")
    return exit_code(reports)


def cmd_audit(args) -> int:
    reports = [load_report(p) for p in args.reports]
    audit = compare_modes(reports)
    print(render_table(reports), end="")
    for v in audit.violations:
        print(f"VIOLATION {v.name}: uncoverable under {v.weaker.value}, {v.verdict} under {v.stronger.value}")
    for v in audit.undecided:
        print(f"undecided {v.name}: uncoverable under {v.weaker.value}, unknown under {v.stronger.value}")
    return EXIT_CLEAN if audit.ok else EXIT_ERROR


# --- parser ---


def _design_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target", required=True, help="TargetConfig JSON (RTL files, labels, core binding)")
    p.add_argument("--max-paths", type=int)
    p.add_argument("--max-edges", type=int)


def _program_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--program", help="Assembly source (.s) or hex image")
    p.add_argument("--meta", help="Sidecar JSON for a hex image")
    p.add_argument("--trigger", type=lambda s: int(s, 0), help="Value for {TRIGGER} in assembly sources")
    p.add_argument("--call-stack-depth", type=int)


def _check_args(p: argparse.ArgumentParser, modes: list[str]) -> None:
    p.add_argument("--mode", choices=modes, default="none")
    p.add_argument("--max-k", type=int, help="BMC bound; 0 derives it from the path")
    p.add_argument("--induction-depth", type=int)
    p.add_argument("--explicit-state-bits", type=int)
    p.add_argument("--parallelism", "-j", type=int)
    p.add_argument("--dump-cnf", action="store_true", help="Write every BMC query as DIMACS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakcover", description="Hardware/software confidentiality co-verification")
    parser.add_argument("--log-level", default=settings.log_level)
    parser.add_argument("--diagnostics-json", action="store_true", help="Print errors as JSON diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)
    modes = [m.value for m in Mode]

    p = sub.add_parser("paths", help="Enumerate leakage paths")
    _design_args(p)
    p.add_argument("--out", help="Write the paths as JSON lines")
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("props", help="Emit one PSL cover property per path")
    _design_args(p)
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(func=cmd_props)

    p = sub.add_parser("assume", help="Emit the assume properties of a mode")
    _design_args(p)
    _program_args(p)
    p.add_argument("--mode", choices=modes, default="used")
    p.add_argument("--out", help="Output directory; stdout when omitted")
    p.set_defaults(func=cmd_assume)

    p = sub.add_parser("check", help="Check properties and print verdicts")
    _design_args(p)
    _program_args(p)
    _check_args(p, modes)
    p.add_argument("--select", nargs="+", help="Property names or path id prefixes")
    p.set_defaults(func=cmd_check, out=None)

    p = sub.add_parser("run", help="Full pipeline with report files")
    _design_args(p)
    _program_args(p)
    _check_args(p, modes + ["chain"])
    p.add_argument("--out", help="Report directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="Check verdict monotonicity across saved reports")
    p.add_argument("reports", nargs="+", help="Report directories or report.json files")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except LeakcoverError as exc:
        if args.diagnostics_json:
            print(exc.diagnostic().model_dump_json(), file=sys.stderr)
        else:
            print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except ValidationError as exc:
        message = exc.errors()[0]["msg"]
        if args.diagnostics_json:
            print(json.dumps({"severity": "error", "code": "config", "message": message}), file=sys.stderr)
        else:
            print(f"error: {message}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
