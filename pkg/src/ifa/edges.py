"""Signal-level explicit-flow edges extracted from the netlist assignments.

An edge ``a -> b`` exists when some assignment to ``b`` reads ``a`` as data
(mux selects, if/case conditions and memory addresses are control, not data).
All assignments to ``b`` reading ``a`` are OR-collected into one edge whose
activations keep the per-assignment conditions and memory addresses.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional

from src.hdl.expr import (
    Binary,
    Concat,
    Const,
    Expr,
    MemRead,
    Ref,
    Ternary,
    Trunc,
    and_,
    is_true,
    not_,
    or_,
    truth,
)
from src.hdl.netlist import Assignment, FlatNetlist
from src.ifa.labels import Bits, LabelConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Flow:
    """One data operand of an assignment source and where its bits land."""

    src: Bits
    lo: int  # result bit range the operand affects, relative to the source expression
    hi: int
    condition: Expr  # mux arm selection along the way
    read_addr: Optional[Expr] = None


@dataclass(frozen=True)
class Activation:
    assignment: int
    condition: Expr
    read_addr: Optional[Expr] = None
    write_addr: Optional[Expr] = None


@dataclass(frozen=True)
class AssignmentEdge:
    src: Bits
    dst: Bits
    sequential: bool
    activations: tuple[Activation, ...]

    @cached_property
    def condition(self) -> Expr:
        """OR over the activations, ignoring memory addresses."""
        return or_(*[a.condition for a in self.activations])

    @property
    def conditional(self) -> bool:
        return not is_true(self.condition)

    @property
    def assignment_id(self) -> int:
        return self.activations[0].assignment

    @property
    def key(self) -> str:
        return f"{self.src}->{self.dst}"

    def __str__(self) -> str:
        return self.key


def data_flows(e: Expr, condition: Expr = Const(1, 1), lo: int = 0) -> Iterator[Flow]:
    """Data operands of ``e``; ternary conditions and memory addresses are skipped."""
    if isinstance(e, Const):
        return
    if isinstance(e, Ref):
        yield Flow(Bits(e.name, e.msb, e.lsb), lo, lo + e.width - 1, condition)
        return
    if isinstance(e, MemRead):
        yield Flow(Bits(e.name, e.width - 1, 0), lo, lo + e.width - 1, condition, e.addr)
        return
    if isinstance(e, Ternary):
        c = truth(e.cond)
        yield from data_flows(e.a, and_(condition, c), lo)
        yield from data_flows(e.b, and_(condition, not_(c)), lo)
        return
    if isinstance(e, Concat):
        offset = lo + e.width
        for part in e.parts:
            offset -= part.width
            yield from data_flows(part, condition, offset)
        return
    if isinstance(e, Trunc):
        for flow in data_flows(e.a, condition, lo):
            if flow.lo < lo + e.width:
                yield Flow(flow.src, flow.lo, min(flow.hi, lo + e.width - 1), flow.condition, flow.read_addr)
        return
    # Arithmetic, shifts, comparisons, reductions and slices of computed values
    # spread every operand over the whole result.
    for child in e.children():
        for flow in data_flows(child, condition, lo):
            yield Flow(flow.src, lo, lo + e.width - 1, flow.condition, flow.read_addr)


def _conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op == "&&":
        return _conjuncts(e.a) + _conjuncts(e.b)
    return [e]


def exclusive(c1: Expr, c2: Expr) -> bool:
    """Syntactic check that two conditions can never hold together."""
    for p in _conjuncts(c1):
        for q in _conjuncts(c2):
            if q == not_(p) or p == not_(q):
                return True
            if (
                isinstance(p, Binary)
                and isinstance(q, Binary)
                and p.op == q.op == "=="
                and p.a == q.a
                and isinstance(p.b, Const)
                and isinstance(q.b, Const)
                and p.b.value != q.b.value
            ):
                return True
    return False


def effective_condition(a: Assignment, later: list[Assignment]) -> Expr:
    """Condition under which ``a``'s value survives: later writes covering its bits win."""
    terms = [a.condition]
    for b in later:
        if b.target.addr is not None or b.target.lsb > a.target.lsb or b.target.msb < a.target.msb:
            continue
        if not exclusive(a.condition, b.condition):
            terms.append(not_(b.condition))
    return and_(*terms)


def assignment_flows(netlist: FlatNetlist, a: Assignment) -> Iterator[tuple[Flow, Bits, Expr]]:
    """(flow, destination bits, full activation condition) for every data operand of ``a``."""
    drivers = netlist.drivers_of(a.target.name)
    later = [b for b in drivers if b.order > a.order]
    condition = effective_condition(a, later)
    width = a.target.width
    for flow in data_flows(a.source):
        if flow.lo >= width:
            continue
        dst = Bits(a.target.name, a.target.lsb + min(flow.hi, width - 1), a.target.lsb + flow.lo)
        yield flow, dst, and_(condition, flow.condition)


def build_edges(netlist: FlatNetlist, labels: Optional[LabelConfig] = None) -> list[AssignmentEdge]:
    """Signal-level edges, deterministic order; edges touching a declassifier are dropped."""
    declassified = labels.declassifiers if labels else frozenset()
    grouped: dict[tuple[str, str], dict] = {}
    for a in sorted(netlist.assignments, key=lambda a: a.order):
        if a.target.name in declassified:
            continue
        for flow, dst, condition in assignment_flows(netlist, a):
            if flow.src.name in declassified or flow.src.name == dst.name:
                continue
            entry = grouped.setdefault(
                (flow.src.name, dst.name),
                {"src": [], "dst": [], "acts": [], "sequential": a.clocked},
            )
            entry["src"].append(flow.src)
            entry["dst"].append(dst)
            act = Activation(a.id, condition, flow.read_addr, a.target.addr)
            if act not in entry["acts"]:
                entry["acts"].append(act)
    edges = []
    for (src, dst), entry in grouped.items():
        edges.append(
            AssignmentEdge(
                Bits(src, max(b.msb for b in entry["src"]), min(b.lsb for b in entry["src"])),
                Bits(dst, max(b.msb for b in entry["dst"]), min(b.lsb for b in entry["dst"])),
                entry["sequential"],
                tuple(entry["acts"]),
            )
        )
    edges.sort(key=lambda e: e.key)
    logger.debug("Built %d edges over %d assignments", len(edges), len(netlist.assignments))
    return edges
