"""Time-frame expansion of a transition system and its cover monitor."""

import logging
from dataclasses import dataclass, field
from typing import Optional

from src.checker.bitblast import Blaster, Circuit, Value, Word
from src.checker.monitor import INIT, MonitorAutomaton
from src.checker.sat import SatSession
from src.checker.ts import TransitionSystem
from src.hdl.expr import Expr
from src.hdl.netlist import SignalKind

logger = logging.getLogger(__name__)


@dataclass
class Frame:
    index: int
    env: dict[str, Value]  # every signal and aux register during this cycle
    inputs: dict[str, Word]
    monitor: list[int]  # active literal per monitor state, INIT excluded
    blaster: Blaster
    accept: int = 0
    constraint: int = 0
    next_state: dict[str, Value] = field(default_factory=dict)
    next_monitor: list[int] = field(default_factory=list)


class Unroller:
    """Builds frames on demand; frame k+1's state literals are frame k's next-state literals."""

    def __init__(self, ts: TransitionSystem, monitor: Optional[MonitorAutomaton], session: SatSession, free_init: bool = False):
        self.ts = ts
        self.monitor = monitor
        self.s = session
        self.c = Circuit(session)
        self.frames: list[Frame] = []
        self.free_init = free_init
        self._clock = ts.netlist.clock
        self._reset = ts.netlist.reset[0] if ts.netlist.reset else None

    # --- initial state ---

    def _initial(self) -> tuple[dict[str, Value], list[int]]:
        c = self.c
        state: dict[str, Value] = {}
        for s in self.ts.netlist.state_signals:
            if s.is_memory:
                state[s.name] = [c.fresh(s.width, f"{s.name}[{i}]@0") for i in range(s.depth)]
            elif s.init is not None and not self.free_init:
                state[s.name] = c.const(s.init, s.width)
            else:
                state[s.name] = c.fresh(s.width, f"{s.name}@0")
        for r in self.ts.aux:
            if r.init is not None and not self.free_init:
                state[r.name] = c.const(r.init, r.width)
            else:
                state[r.name] = c.fresh(r.width, f"{r.name}@0")
        bits = self.monitor.state_bits if self.monitor else 0
        if self.free_init:
            mon = [self.s.new_var(f"monitor{q + 1}@0") for q in range(bits)]
        else:
            mon = [c.F] * bits
        return state, mon

    # --- one cycle ---

    def frame(self, k: int) -> Frame:
        while len(self.frames) <= k:
            self._add_frame()
        return self.frames[k]

    def _add_frame(self) -> Frame:
        k = len(self.frames)
        c = self.c
        if k == 0:
            state, mon = self._initial()
        else:
            prev = self.frames[-1]
            state, mon = prev.next_state, prev.next_monitor

        netlist = self.ts.netlist
        env: dict[str, Value] = {}
        inputs: dict[str, Word] = {}
        for s in netlist.signals:
            if s.kind == SignalKind.INPUT:
                if s.id == self._reset:
                    env[s.name] = c.const(netlist.reset_inactive, s.width)
                elif s.id == self._clock:
                    env[s.name] = c.const(0, s.width)
                else:
                    inputs[s.name] = env[s.name] = c.fresh(s.width, f"{s.name}@{k}")
            elif s.is_state:
                env[s.name] = state[s.name]
            else:
                env[s.name] = c.const(0, s.width)
        for r in self.ts.aux:
            env[r.name] = state[r.name]
        # comb_order is topological, so a memoised reference is never read before its driver runs
        blaster = Blaster(c, env)
        for name in netlist.comb_order:
            value = list(env[name])
            for a in netlist.drivers_of(name):
                value = self._write(blaster, value, a)
            env[name] = value

        frame = Frame(k, env, inputs, mon, blaster)
        frame.constraint = c.and_all([blaster.truth(cond) for _, cond in self.ts.constraints])
        if frame.constraint != c.T:
            self.s.add([frame.constraint])

        nxt: dict[str, Value] = {}
        for s in netlist.state_signals:
            drivers = [a for a in netlist.drivers_of(s.name) if a.clocked]
            if s.is_memory:
                words = [list(w) for w in env[s.name]]
                for a in drivers:
                    cond = blaster.truth(a.condition)
                    addr = blaster.blast(a.target.addr)
                    data = c.extend(blaster.blast(a.source), s.width)
                    for i in range(s.depth):
                        hit = c.and2(cond, c.word_index(addr, i))
                        if hit != c.F:
                            words[i] = c.ite(hit, data, words[i])
                nxt[s.name] = words
            else:
                value = list(env[s.name])
                for a in drivers:
                    value = self._write(blaster, value, a)
                nxt[s.name] = value
        for r in self.ts.aux:
            nxt[r.name] = c.extend(blaster.blast(r.next), r.width)
        frame.next_state = nxt

        if self.monitor:
            frame.accept, frame.next_monitor = self._monitor_step(blaster, mon)
        self.frames.append(frame)
        return frame

    def _write(self, blaster: Blaster, value: list[int], a) -> list[int]:
        c = self.c
        cond = blaster.truth(a.condition)
        if cond == c.F:
            return value
        lo, hi = a.target.lsb, a.target.msb
        src = c.extend(blaster.blast(a.source), hi - lo + 1)
        return value[:lo] + c.ite(cond, src, value[lo : hi + 1]) + value[hi + 1 :]

    def _monitor_step(self, blaster: Blaster, mon: list[int]) -> tuple[int, list[int]]:
        c = self.c
        pre = [c.T] + mon
        incoming: list[list[int]] = [[] for _ in range(self.monitor.num_states)]
        for t in self.monitor.transitions:
            fire = c.and2(pre[t.src], blaster.truth(t.cond))
            incoming[t.dst].append(fire)
        accept = c.or_all([lit for f in self.monitor.finals for lit in incoming[f]])
        nxt = [c.or_all(incoming[q]) for q in range(1, self.monitor.num_states)]
        return accept, nxt

    # --- helpers for lemmas and witnesses ---

    def blast_at(self, k: int, e: Expr) -> int:
        return self.frame(k).blaster.truth(e)

    def monitor_bit(self, k: int, q: int) -> int:
        """Literal for monitor state q (q != INIT) being active at the start of frame k."""
        assert q != INIT
        return self.frame(k).monitor[q - 1]

    def word_value(self, word: Word) -> int:
        return sum(1 << i for i, lit in enumerate(word) if self.s.value(lit))
