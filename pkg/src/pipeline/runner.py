"""End-to-end flow: paths -> properties -> assumptions -> parallel checks -> report."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, TypeVar

from src.checker.check import check_property
from src.checker.monitor import compile_monitor
from src.checker.ts import TransitionSystem, compile_ts, held_registers
from src.checker.verdict import Verdict
from src.checker.witness import export_witness
from src.config.settings import settings
from src.diagnostics import ProgramError, StageError
from src.hdl.loader import load_rtl
from src.hdl.netlist import FlatNetlist
from src.ifa.labels import LabelConfig, load_target_config, resolve_labels
from src.ifa.paths import LeakagePath, PathSet, cached_paths
from src.pipeline.report import attribute_witness, write_report
from src.pipeline.store import persist_report
from src.properties.blocks import build_property
from src.properties.property import Property
from src.properties.psl import write_properties
from src.schemas.report import PropertyRecord, Report
from src.schemas.run import ESCALATION, MODE_CHAIN, Mode, RunConfig
from src.schemas.target import CoreBinding, TargetConfig
from src.software.assembler import load_any
from src.software.assumptions import AssumptionSet, assumptions_for, write_assumptions
from src.software.program import ProgramImage, static_call_depth

logger = logging.getLogger(__name__)

T = TypeVar("T")


def stage(name: str, fn: Callable[..., T], *args, **kwargs) -> T:
    """Run one pipeline stage, tagging any failure with the stage name."""
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class Prepared:
    """Everything shared read-only by the check workers."""

    config: RunConfig
    target: TargetConfig
    netlist: FlatNetlist
    labels: LabelConfig
    paths: PathSet
    properties: list[Property]
    program: Optional[ProgramImage] = None
    assumptions: dict[Mode, AssumptionSet] = field(default_factory=dict)

    @property
    def binding(self) -> Optional[CoreBinding]:
        return self.target.core

    @property
    def fetch_addr(self) -> Optional[str]:
        b = self.binding
        return b.fetch_addr if b and b.fetch_addr in self.netlist.by_name else None


def modes_for(mode: Mode) -> tuple[Mode, ...]:
    return ESCALATION if mode == Mode.FULL else (mode,)


def _selected(path: LeakagePath, select: list[str]) -> bool:
    return any(s == f"cover_{path.id}" or path.id.startswith(s) for s in select)


def prepare(config: RunConfig) -> Prepared:
    target = stage("config", load_target_config, config.target)
    netlist, key = stage("hdl", load_rtl, target.rtl, target.top)
    labels = stage("labels", resolve_labels, target, netlist)
    limits = config.limits
    paths = stage("ifa", cached_paths, netlist, key, labels, limits.max_paths, limits.max_edges)
    if config.select:
        paths = PathSet([p for p in paths if _selected(p, config.select)], paths.truncated, paths.edge_limit_hit)
    properties = stage("properties", lambda: [build_property(p, netlist) for p in paths])
    program = None
    if config.program:
        program = stage("program", load_any, config.program, config.program_meta, config.trigger)
    prepared = Prepared(config, target, netlist, labels, paths, properties, program)
    for mode in modes_for(config.mode):
        prepared.assumptions[mode] = stage(
            "assumptions", assumptions_for, mode, netlist, target.core, program, limits.call_stack_depth
        )
    return prepared


def transition_system(prepared: Prepared, mode: Mode, prop: Property) -> TransitionSystem:
    return compile_ts(
        prepared.netlist,
        prepared.assumptions[mode],
        extra_aux=held_registers(prop.aux),
        fetch_addr=prepared.fetch_addr,
    )


@dataclass
class Outcome:
    mode: Mode
    verdict: Verdict
    stages: list[Mode]
    sat_queries: int
    wall_ms: float


def decide(prepared: Prepared, prop: Property) -> Outcome:
    """Check one property; under Full escalate Used -> Jumps -> Stack until one proves it uncoverable."""
    start = time.perf_counter()
    monitor = compile_monitor(prop.body)
    dump_dir = None
    if prepared.config.output_dir and prepared.config.dump_cnf:
        dump_dir = Path(prepared.config.output_dir) / "cnf"
    tried: list[Mode] = []
    queries = 0
    verdict = None
    for mode in modes_for(prepared.config.mode):
        tried.append(mode)
        ts = transition_system(prepared, mode, prop)
        verdict = check_property(ts, prop, prepared.config.limits, monitor, dump_dir)
        queries += verdict.sat_queries
        if verdict.uncoverable:
            break
    return Outcome(tried[-1], verdict, tried, queries, (time.perf_counter() - start) * 1000)


def _record(prepared: Prepared, prop: Property, path: LeakagePath, outcome: Outcome) -> PropertyRecord:
    v = outcome.verdict
    record = PropertyRecord(
        name=prop.name,
        path_id=path.id,
        source=prop.source,
        sink=prop.sink,
        mode=outcome.mode,
        stages=[m.value for m in outcome.stages],
        verdict=v.kind.value,
        method=v.method.value if v.method else "",
        bound=v.bound,
        reason=v.reason,
        wall_ms=round(outcome.wall_ms, 1),
        sat_queries=outcome.sat_queries,
    )
    if v.witness is not None:
        record.attribution = attribute_witness(v.witness, prepared.program, prepared.binding)
        if prepared.config.output_dir:
            file = Path(prepared.config.output_dir) / "witnesses" / f"{prop.name}.txt"
            export_witness(v.witness, file)
            record.witness_file = str(file)
    return record


def _call_depth(program: Optional[ProgramImage]) -> int:
    if program is None:
        return 0
    try:
        return static_call_depth(program)
    except ProgramError as exc:
        logger.warning("Call depth unavailable: %s", exc.message)
        return -1


def _write_inputs(prepared: Prepared, out_dir: Path) -> None:
    write_properties(prepared.properties, out_dir / "props")
    for mode, aset in prepared.assumptions.items():
        write_assumptions(aset, out_dir / "assumptions" / f"{mode.value}.psl")


def run(config: RunConfig) -> Report:
    """Run the whole flow; a failing stage still leaves a report marked incomplete."""
    start = time.perf_counter()
    report = Report(design=Path(config.target).stem, program=config.program, mode=config.mode, fingerprint=config.fingerprint())
    out_dir = Path(config.output_dir) if config.output_dir else None
    try:
        prepared = prepare(config)
    except StageError as exc:
        _abort(report, exc, out_dir, start)
        raise

    report.design = prepared.netlist.name
    report.paths = len(prepared.paths)
    report.paths_truncated = prepared.paths.limited
    if prepared.program is not None:
        report.instructions = prepared.program.size
        report.call_depth = _call_depth(prepared.program)
    if out_dir:
        _write_inputs(prepared, out_dir)

    tasks = list(zip(prepared.properties, prepared.paths))
    logger.info(
        "Checking %d propert%s under mode %s with %d worker(s)",
        len(tasks), "y" if len(tasks) == 1 else "ies", config.mode.value, config.parallelism,
    )
    records: list[Optional[PropertyRecord]] = [None] * len(tasks)
    with ThreadPoolExecutor(max_workers=max(config.parallelism, 1)) as pool:
        futures = [pool.submit(decide, prepared, prop) for prop, _ in tasks]
        try:
            for i, future in enumerate(futures):
                outcome = stage("check", future.result)
                prop, path = tasks[i]
                records[i] = _record(prepared, prop, path, outcome)
        except StageError as exc:
            for f in futures:
                f.cancel()
            report.records = [r for r in records if r is not None]
            _abort(report, exc, out_dir, start)
            raise

    report.records = records
    report.recount()
    report.summary.total_ms = round((time.perf_counter() - start) * 1000, 1)
    logger.info(
        "Mode %s: %d covered, %d uncoverable, %d unknown (%.0fms)",
        config.mode.value, report.summary.covered, report.summary.uncoverable, report.summary.unknown,
        report.summary.total_ms,
    )
    if out_dir:
        write_report(report, out_dir)
    if settings.persist_reports:
        persist_report(report)
    return report


def _abort(report: Report, exc: StageError, out_dir: Optional[Path], start: float) -> None:
    logger.error("Stage %s failed: %s", exc.stage, exc.message)
    report.incomplete = True
    report.error = str(exc)
    report.recount()
    report.summary.total_ms = round((time.perf_counter() - start) * 1000, 1)
    if out_dir:
        write_report(report, out_dir)


def run_modes(config: RunConfig, modes: tuple[Mode, ...] = MODE_CHAIN) -> list[Report]:
    """The same configuration under several modes, each in its own output subdirectory."""
    reports = []
    for mode in modes:
        sub = config.model_copy(
            update={"mode": mode, "output_dir": str(Path(config.output_dir) / mode.value) if config.output_dir else None}
        )
        reports.append(run(sub))
    return reports
