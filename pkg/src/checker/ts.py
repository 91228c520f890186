"""Transition systems: a netlist plus assumption constraints and monitor registers."""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from src.diagnostics import AssumptionError, MultiDriverError, WidthMismatch
from src.hdl.expr import Expr, signal_names
from src.hdl.netlist import FlatNetlist, SignalDecl
from src.properties.property import HeldAddress
from src.software.assumptions import AssumptionSet, AuxRegister

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransitionSystem:
    netlist: FlatNetlist
    constraints: tuple[tuple[str, Expr], ...] = ()
    aux: tuple[AuxRegister, ...] = ()
    assumptions: Optional[AssumptionSet] = None
    reach: Optional[frozenset[int]] = None
    overflow: Optional[str] = None
    fetch_addr: Optional[str] = None
    state_layout: dict[str, int] = field(default_factory=dict, compare=False)

    @property
    def state_bits(self) -> int:
        return sum(self.state_layout.values())

    @property
    def input_bits(self) -> int:
        return sum(s.width for s in self.netlist.free_inputs)

    @property
    def registers(self) -> tuple[SignalDecl, ...]:
        return self.netlist.state_signals


def _check_drivers(netlist: FlatNetlist) -> None:
    for name, drivers in netlist.drivers.items():
        by_process: dict[int, list] = {}
        for a in drivers:
            by_process.setdefault(a.process, []).append(a)
        if len(by_process) < 2:
            continue
        ranges = [
            (p, a.target.lsb, a.target.msb, a.line) for p, items in by_process.items() for a in items
        ]
        for i, (p1, lo1, hi1, line) in enumerate(ranges):
            for p2, lo2, hi2, _ in ranges[i + 1 :]:
                if p1 != p2 and lo1 <= hi2 and lo2 <= hi1:
                    raise MultiDriverError(f"'{name}' bits [{min(hi1, hi2)}:{max(lo1, lo2)}] are driven from two processes", line)


def held_registers(held: Iterable[HeldAddress]) -> tuple[AuxRegister, ...]:
    """Frozen address variables: free at the start, never change."""
    return tuple(AuxRegister(h.name, h.width, h.ref(), init=None) for h in held)


def compile_ts(
    netlist: FlatNetlist,
    assumptions: Optional[AssumptionSet] = None,
    extra_aux: Iterable[AuxRegister] = (),
    fetch_addr: Optional[str] = None,
) -> TransitionSystem:
    _check_drivers(netlist)
    aux = tuple(assumptions.aux if assumptions else ()) + tuple(extra_aux)
    known = set(netlist.by_name)
    for r in aux:
        if r.name in known:
            raise AssumptionError(f"aux register '{r.name}' clashes with a design signal")
        known.add(r.name)
    for r in aux:
        missing = signal_names(r.next) - known
        if missing:
            raise AssumptionError(f"aux register '{r.name}' refers to unknown signal(s) {', '.join(sorted(missing))}")
        if r.next.width != r.width:
            raise WidthMismatch(f"aux register '{r.name}' is {r.width} bits but its update is {r.next.width}")

    constraints = tuple(assumptions.expressions()) if assumptions else ()
    for name, cond in constraints:
        missing = signal_names(cond) - known
        if missing:
            raise AssumptionError(f"{name} refers to unknown signal(s) {', '.join(sorted(missing))}")
        if cond.width != 1:
            raise WidthMismatch(f"{name} is {cond.width} bits wide, expected a 1-bit condition")

    layout = {s.name: s.width * s.depth for s in netlist.state_signals}
    layout.update({r.name: r.width for r in aux})
    ts = TransitionSystem(
        netlist,
        constraints,
        aux,
        assumptions,
        assumptions.reach if assumptions else None,
        assumptions.overflow if assumptions else None,
        fetch_addr,
        layout,
    )
    logger.info(
        "Transition system for %s: %d state bits (%d design, %d aux), %d input bits, %d constraint(s)",
        netlist.name,
        ts.state_bits,
        netlist.state_bits,
        ts.state_bits - netlist.state_bits,
        ts.input_bits,
        len(constraints),
    )
    return ts
