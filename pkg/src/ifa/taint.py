"""Bit-precise explicit-flow taint tracking on top of the reference simulator.

Only the selected mux arm propagates, a memory read propagates the taint of the
addressed word, and conditions never propagate. These are the edge semantics,
so a sink can only become tainted along a reported path.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from src.hdl.expr import evaluate, mask
from src.hdl.netlist import Assignment, FlatNetlist, SignalKind
from src.hdl.simulate import Simulator, State, write_bits
from src.ifa.edges import Flow, data_flows
from src.ifa.labels import Bits

logger = logging.getLogger(__name__)

Taint = dict[str, object]  # signal -> bit mask, memory -> list of word masks


@dataclass
class TaintTrace:
    taint: list[Taint] = field(default_factory=list)
    values: list[dict] = field(default_factory=list)

    def tainted(self, cycle: int, bits: Bits) -> bool:
        t = self.taint[cycle].get(bits.name, 0)
        if isinstance(t, list):
            return any(w & bits.mask for w in t)
        return bool(t & bits.mask)

    def first_tainted(self, bits: Bits) -> Optional[int]:
        for cycle in range(len(self.taint)):
            if self.tainted(cycle, bits):
                return cycle
        return None


class TaintSimulator:
    def __init__(self, netlist: FlatNetlist, declassifiers: Iterable[str] = ()):
        self.netlist = netlist
        self.sim = Simulator(netlist)
        self.declassifiers = frozenset(declassifiers)
        self._flows: dict[int, list[Flow]] = {a.id: list(data_flows(a.source)) for a in netlist.assignments}
        self._comb = frozenset(netlist.comb_order)

    def _contribution(self, a: Assignment, env, taint: Taint) -> int:
        """Target-relative mask of bits that receive tainted data from ``a``."""
        width = a.target.width
        bits = 0
        for flow in self._flows[a.id]:
            if flow.lo >= width or not evaluate(flow.condition, env):
                continue
            t = taint.get(flow.src.name, 0)
            if flow.read_addr is not None:
                addr = evaluate(flow.read_addr, env)
                t = t[addr] if addr < len(t) else 0
            if t & flow.src.mask:
                bits |= mask(min(flow.hi, width - 1) - flow.lo + 1) << flow.lo
        return bits

    def _fold(self, value: int, drivers, env, taint: Taint) -> int:
        for a in drivers:
            if evaluate(a.condition, env):
                value = write_bits(value, a.target.msb, a.target.lsb, self._contribution(a, env, taint))
        return value

    def initial_taint(self) -> Taint:
        return self.sim.zero_state()

    def run(
        self,
        source: Bits,
        inputs: list[Mapping[str, int]],
        state: Optional[State] = None,
        seed_cycles: Optional[set[int]] = None,
    ) -> TaintTrace:
        """Simulate ``inputs``; ``source`` is tainted on ``seed_cycles`` (every cycle when None)."""
        netlist = self.netlist
        state = state if state is not None else self.sim.initial_state()
        taint_state = self.initial_taint()
        trace = TaintTrace()
        source_decl = netlist.signal(source.name)
        for cycle, frame in enumerate(inputs):
            seeded = seed_cycles is None or cycle in seed_cycles
            env = self.sim.evaluate_cycle(state, frame)
            taint: Taint = {name: (list(v) if isinstance(v, list) else v) for name, v in taint_state.items()}
            for s in netlist.signals:
                if s.kind == SignalKind.INPUT:
                    taint[s.name] = 0
            if seeded and source.name not in self._comb:
                if source_decl.is_memory:
                    taint[source.name] = [w | source.mask for w in taint[source.name]]
                else:
                    taint[source.name] = taint.get(source.name, 0) | source.mask
            for name in netlist.comb_order:
                value = 0 if name in self.declassifiers else self._fold(0, netlist.drivers_of(name), env, taint)
                if seeded and name == source.name:
                    value |= source.mask
                taint[name] = value
            trace.taint.append(taint)
            trace.values.append(env)
            taint_state = self._next(env, taint)
            state = self.sim.next_state(env)
        return trace

    def _next(self, env, taint: Taint) -> Taint:
        nxt: Taint = {}
        for s in self.netlist.state_signals:
            drivers = [a for a in self.netlist.drivers_of(s.name) if a.clocked]
            if s.name in self.declassifiers:
                nxt[s.name] = [0] * s.depth if s.is_memory else 0
            elif s.is_memory:
                words = list(taint[s.name])
                for a in drivers:
                    if evaluate(a.condition, env):
                        addr = evaluate(a.target.addr, env)
                        if addr < s.depth:
                            words[addr] = write_bits(words[addr], a.target.msb, a.target.lsb, self._contribution(a, env, taint))
                nxt[s.name] = words
            else:
                nxt[s.name] = self._fold(taint[s.name], drivers, env, taint)
        return nxt


def taint_simulate(
    netlist: FlatNetlist,
    source: Bits,
    inputs: list[Mapping[str, int]],
    state: Optional[State] = None,
    seed_cycles: Optional[set[int]] = None,
    declassifiers: Iterable[str] = (),
) -> TaintTrace:
    return TaintSimulator(netlist, declassifiers).run(source, inputs, state, seed_cycles)
