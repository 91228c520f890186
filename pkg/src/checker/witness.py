"""Witness traces: extraction from SAT models, replay on the simulator, text export."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from src.checker.monitor import MonitorAutomaton
from src.checker.ts import TransitionSystem
from src.checker.unroll import Unroller
from src.hdl.expr import evaluate, mask
from src.hdl.simulate import Simulator, State
from src.properties.sere import Seq, matches_ending_at

logger = logging.getLogger(__name__)


@dataclass
class Witness:
    """Initial state plus per-cycle inputs; ``signals`` holds every scalar value per cycle."""

    initial: State
    aux_initial: dict[str, int]
    inputs: list[dict[str, int]]
    signals: list[dict[str, int]] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.inputs)

    def column(self, name: str) -> list[int]:
        return [row.get(name, 0) for row in self.signals]


@dataclass
class Replay:
    ok: bool
    trace: list[dict[str, object]]
    reason: str = ""


def simulate(
    ts: TransitionSystem,
    initial: State,
    aux_initial: Mapping[str, int],
    inputs: Sequence[Mapping[str, int]],
) -> tuple[list[dict[str, object]], list[tuple[int, str]]]:
    """Run the design and aux registers; returns per-cycle values and assumption violations."""
    sim = Simulator(ts.netlist)
    state = {k: (list(v) if isinstance(v, list) else v) for k, v in initial.items()}
    aux = dict(aux_initial)
    trace: list[dict[str, object]] = []
    violations: list[tuple[int, str]] = []
    for cycle, frame in enumerate(inputs):
        env = sim.evaluate_cycle(state, frame)
        full = {**env, **aux}
        for name, cond in ts.constraints:
            if not evaluate(cond, full):
                violations.append((cycle, name))
        trace.append(full)
        aux = {r.name: evaluate(r.next, full) & mask(r.width) for r in ts.aux}
        state = sim.next_state(env)
    return trace, violations


def scalar_rows(trace: Sequence[Mapping[str, object]]) -> list[dict[str, int]]:
    return [{k: v for k, v in env.items() if isinstance(v, int)} for env in trace]


def extract_witness(un: Unroller, k: int) -> Witness:
    """Read frames 0..k out of the session's current model."""
    first = un.frame(0)
    initial: State = {}
    for s in un.ts.netlist.state_signals:
        value = first.env[s.name]
        if s.is_memory:
            initial[s.name] = [un.word_value(w) for w in value]
        else:
            initial[s.name] = un.word_value(value)
    aux_initial = {r.name: un.word_value(first.env[r.name]) for r in un.ts.aux}
    inputs = [{name: un.word_value(w) for name, w in un.frame(j).inputs.items()} for j in range(k + 1)]
    trace, _ = simulate(un.ts, initial, aux_initial, inputs)
    return Witness(initial, aux_initial, inputs, scalar_rows(trace))


def replay_witness(witness: Witness, ts: TransitionSystem, seq: Seq, monitor: Optional[MonitorAutomaton] = None) -> Replay:
    """Independent check: every assumption holds each cycle and the sequence matches on the last cycle."""
    trace, violations = simulate(ts, witness.initial, witness.aux_initial, witness.inputs)
    if violations:
        cycle, name = violations[0]
        return Replay(False, trace, f"{name} violated on cycle {cycle}")
    if not trace:
        return Replay(False, trace, "empty witness")
    last = len(trace) - 1
    if not matches_ending_at(seq, trace, last):
        return Replay(False, trace, f"sequence does not match on cycle {last}")
    if monitor is not None and last not in monitor.accepts_at(trace):
        return Replay(False, trace, f"monitor does not accept on cycle {last}")
    return Replay(True, trace)


def overflowed(witness: Witness, flag: Optional[str]) -> bool:
    return bool(flag) and any(row.get(flag, 0) for row in witness.signals)


def export_witness(witness: Witness, path: Optional[str | Path] = None, columns: Optional[Sequence[str]] = None) -> str:
    """Cycle-indexed value table, one row per cycle, hex values."""
    names = list(columns) if columns else sorted({k for row in witness.signals for k in row})
    lines = ["cycle " + " ".join(names)]
    for cycle, row in enumerate(witness.signals):
        lines.append(f"{cycle} " + " ".join(f"{row.get(n, 0):x}" for n in names))
    memories = {k: v for k, v in witness.initial.items() if isinstance(v, list)}
    for name, words in sorted(memories.items()):
        lines.append(f"# init {name} " + " ".join(f"{w:x}" for w in words))
    for name, value in sorted(witness.aux_initial.items()):
        lines.append(f"# init {name} {value:x}")
    text = "\n".join(lines) + "\n"
    if path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def load_witness_table(text: str) -> list[dict[str, int]]:
    """Inverse of the table part of ``export_witness``."""
    rows = []
    header: list[str] = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] == "cycle":
            header = fields[1:]
            continue
        rows.append({name: int(v, 16) for name, v in zip(header, fields[1:])})
    return rows
