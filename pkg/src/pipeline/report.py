"""Report assembly: witness attribution, mode audits, summary tables, report files."""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel, Field

from src.checker.witness import Witness
from src.diagnostics import ConfigMismatch
from src.schemas.report import AttributedFetch, Report
from src.schemas.run import Mode
from src.schemas.target import CoreBinding
from src.software.program import ProgramImage

logger = logging.getLogger(__name__)

INCOMPLETE_MARKER = "INCOMPLETE"


def attribute_witness(
    witness: Witness, program: Optional[ProgramImage], binding: Optional[CoreBinding]
) -> list[AttributedFetch]:
    """Map every fetch cycle of a witness to the program line at that address.

    A fetch is mapped only when the address holds a program word and the
    fetched word is that word; anything else is reported unmapped.
    """
    if binding is None:
        return []
    out = []
    for cycle, row in enumerate(witness.signals):
        if binding.fetch_addr not in row:
            continue
        address = row[binding.fetch_addr]
        word = row.get(binding.fetch_data, 0)
        mapped = program is not None and program.words.get(address) == word
        out.append(
            AttributedFetch(
                cycle=cycle,
                address=address,
                word=word,
                line=program.line_at(address) if mapped else None,
                mapped=mapped,
            )
        )
    return out


class ModeViolation(BaseModel):
    name: str
    weaker: Mode
    stronger: Mode
    verdict: str = Field(description="Verdict under the stronger mode")


class ModeAudit(BaseModel):
    """Uncoverable-set growth along the mode chain."""

    modes: list[Mode]
    uncoverable: dict[str, int] = Field(default_factory=dict)
    violations: list[ModeViolation] = Field(default_factory=list)
    undecided: list[ModeViolation] = Field(default_factory=list, description="Stronger mode answered unknown")

    @property
    def ok(self) -> bool:
        return not self.violations


def _comparable(a: Report, b: Report) -> bool:
    fa, fb = a.fingerprint, b.fingerprint
    for key in ("target", "trigger", "limits", "select"):
        if fa.get(key) != fb.get(key):
            return False
    # weak modes may run without a program
    if fa.get("program") and fb.get("program") and fa["program"] != fb["program"]:
        return False
    return True


def compare_modes(reports: Sequence[Report]) -> ModeAudit:
    """Uncoverable under a weaker mode must stay uncoverable under every stronger one."""
    if len(reports) < 2:
        raise ConfigMismatch("at least two reports are needed for a mode audit")
    for r in reports[1:]:
        if not _comparable(reports[0], r):
            raise ConfigMismatch(f"reports for modes {reports[0].mode.value} and {r.mode.value} differ in design, program or limits")
    ordered = sorted(reports, key=lambda r: r.mode.rank)
    audit = ModeAudit(modes=[r.mode for r in ordered])
    verdicts = [{rec.name: rec.verdict for rec in r.records} for r in ordered]
    for r in ordered:
        audit.uncoverable[r.mode.value] = len(r.names_with("uncoverable"))
    for i, weak in enumerate(ordered):
        for j in range(i + 1, len(ordered)):
            strong = ordered[j]
            for name, verdict in sorted(verdicts[i].items()):
                if verdict != "uncoverable" or name not in verdicts[j]:
                    continue
                other = verdicts[j][name]
                if other == "uncoverable":
                    continue
                entry = ModeViolation(name=name, weaker=weak.mode, stronger=strong.mode, verdict=other)
                (audit.undecided if other == "unknown" else audit.violations).append(entry)
    if audit.violations:
        logger.error("Mode audit: %d monotonicity violation(s)", len(audit.violations))
    return audit


def render_table(reports: Sequence[Report]) -> str:
    """Per-mode summary: one column per report."""
    ordered = sorted(reports, key=lambda r: r.mode.rank)
    rows = [
        ("Mode", [r.mode.value for r in ordered]),
        ("Instructions", [str(r.instructions) for r in ordered]),
        ("Call depth", [str(r.call_depth) if r.call_depth >= 0 else "rec" for r in ordered]),
        ("Paths", [str(r.summary.total) for r in ordered]),
        ("Covered", [str(r.summary.covered) for r in ordered]),
        ("Uncoverable", [str(r.summary.uncoverable) for r in ordered]),
        ("Unknown", [str(r.summary.unknown) for r in ordered]),
        ("SAT queries", [str(r.summary.sat_queries) for r in ordered]),
        ("Time [s]", [f"{r.summary.total_ms / 1000:.1f}" for r in ordered]),
    ]
    head = max(len(label) for label, _ in rows)
    widths = [max(len(row[1][i]) for row in rows) for i in range(len(ordered))]
    lines = []
    for label, cells in rows:
        lines.append(label.ljust(head) + "  " + "  ".join(c.rjust(w) for c, w in zip(cells, widths)))
        if label == "Mode":
            lines.append("-" * len(lines[0]))
    if any(r.incomplete for r in ordered):
        lines.append("(incomplete: " + ", ".join(r.mode.value for r in ordered if r.incomplete) + ")")
    return "\n".join(lines) + "\n"


def render_records(report: Report) -> str:
    lines = []
    for rec in report.records:
        extra = f" ({rec.reason})" if rec.reason else ""
        lines.append(f"{rec.name:<20} {rec.verdict:<12} {rec.method:<15} k={rec.bound:<3} {rec.source} -> {rec.sink}{extra}")
        for fetch in rec.attribution:
            if fetch.mapped:
                lines.append(f"    {fetch.cycle:>3}  {fetch.address:#06x}  {fetch.line}")
    return "\n".join(lines) + "\n"


def write_report(report: Report, out_dir: str | Path) -> Path:
    """report.jsonl (one record per line), report.json, summary.txt and the incomplete marker."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "report.jsonl").open("w") as fh:
        for rec in report.records:
            fh.write(rec.model_dump_json() + "\n")
    (out_dir / "report.json").write_text(report.model_dump_json(indent=2) + "\n")
    (out_dir / "summary.txt").write_text(render_table([report]) + "\n" + render_records(report))
    marker = out_dir / INCOMPLETE_MARKER
    if report.incomplete:
        marker.write_text((report.error or "a stage failed") + "\n")
    elif marker.exists():
        marker.unlink()
    logger.info("Report written to %s", out_dir)
    return out_dir


def load_report(path: str | Path) -> Report:
    """Accepts a report directory or its report.json."""
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return Report.model_validate(json.loads(path.read_text()))
