"""Flat, elaborated netlist IR consumed by every downstream stage."""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

from src.hdl.expr import Expr, MemRead, Ref, is_true, signal_names


class SignalKind(str, Enum):
    INPUT = "input-port"
    OUTPUT = "output-port"
    WIRE = "wire"
    REGISTER = "register"
    MEMORY = "memory-array"


class Timing(str, Enum):
    COMBINATIONAL = "combinational"
    CLOCKED = "clocked"


@dataclass(frozen=True)
class SignalDecl:
    id: int
    name: str
    width: int
    kind: SignalKind
    depth: int = 1
    unused: bool = False
    # Constant reset value; None means the register starts free.
    init: Optional[int] = None

    @property
    def is_state(self) -> bool:
        return self.kind in (SignalKind.REGISTER, SignalKind.MEMORY)

    @property
    def is_memory(self) -> bool:
        return self.kind == SignalKind.MEMORY

    def ref(self) -> Ref:
        return Ref(self.name, self.width - 1, 0, self.width)


@dataclass(frozen=True)
class Target:
    name: str
    msb: int
    lsb: int
    addr: Optional[Expr] = None

    @property
    def width(self) -> int:
        return self.msb - self.lsb + 1


@dataclass(frozen=True)
class Assignment:
    id: int
    target: Target
    source: Expr
    condition: Expr
    timing: Timing
    order: int
    process: int
    line: int = 0

    @property
    def unconditional(self) -> bool:
        return is_true(self.condition)

    @property
    def clocked(self) -> bool:
        return self.timing == Timing.CLOCKED

    def reads(self) -> set[str]:
        names = signal_names(self.source) | signal_names(self.condition)
        if self.target.addr is not None:
            names |= signal_names(self.target.addr)
        return names


@dataclass(frozen=True)
class FlatNetlist:
    name: str
    signals: tuple[SignalDecl, ...]
    assignments: tuple[Assignment, ...]
    clock: Optional[int]
    reset: Optional[tuple[int, bool]] = None  # (signal id, active-high)
    comb_order: tuple[str, ...] = field(default=())

    @cached_property
    def by_name(self) -> dict[str, SignalDecl]:
        return {s.name: s for s in self.signals}

    def signal(self, name: str) -> SignalDecl:
        try:
            return self.by_name[name]
        except KeyError:
            raise KeyError(f"unknown signal '{name}'") from None

    @cached_property
    def drivers(self) -> dict[str, tuple[Assignment, ...]]:
        out: dict[str, list[Assignment]] = {}
        for a in sorted(self.assignments, key=lambda a: a.order):
            out.setdefault(a.target.name, []).append(a)
        return {k: tuple(v) for k, v in out.items()}

    def drivers_of(self, name: str) -> tuple[Assignment, ...]:
        return self.drivers.get(name, ())

    @property
    def clock_name(self) -> Optional[str]:
        return self.signals[self.clock].name if self.clock is not None else None

    @property
    def reset_name(self) -> Optional[str]:
        return self.signals[self.reset[0]].name if self.reset else None

    @property
    def reset_inactive(self) -> int:
        """Value that keeps the reset input deasserted."""
        if not self.reset:
            return 0
        return 0 if self.reset[1] else 1

    @cached_property
    def state_signals(self) -> tuple[SignalDecl, ...]:
        return tuple(s for s in self.signals if s.is_state)

    @cached_property
    def free_inputs(self) -> tuple[SignalDecl, ...]:
        """Input ports other than clock and reset."""
        skip = {self.clock} if self.clock is not None else set()
        if self.reset:
            skip.add(self.reset[0])
        return tuple(s for s in self.signals if s.kind == SignalKind.INPUT and s.id not in skip)

    @cached_property
    def state_bits(self) -> int:
        return sum(s.width * s.depth for s in self.state_signals)

    def memory_reads(self, memory: str) -> list[tuple[Assignment, MemRead]]:
        out = []
        for a in self.assignments:
            for node in list(a.source.walk()) + list(a.condition.walk()):
                if isinstance(node, MemRead) and node.name == memory:
                    out.append((a, node))
        return out

    def widths(self) -> dict[str, int]:
        return {s.name: s.width for s in self.signals}
