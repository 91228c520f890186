"""Cover monitors: epsilon-free automata for SEREs.

State 0 is the initial state and is active on every cycle, since a cover
match may start anywhere. A run accepts on the cycle it takes a transition
into a final state, so only non-empty matches count.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping

from src.hdl.expr import Expr, and_, evaluate, is_false
from src.properties.sere import Atom, Concat, Fuse, RepInf, Seq, collapse_fuse

INIT = 0


@dataclass(frozen=True)
class Transition:
    src: int
    cond: Expr
    dst: int


@dataclass(frozen=True)
class MonitorAutomaton:
    num_states: int
    transitions: tuple[Transition, ...]
    finals: frozenset[int]

    @property
    def state_bits(self) -> int:
        """Every state but the initial one is a register of the product."""
        return self.num_states - 1

    @property
    def empty(self) -> bool:
        return not self.finals or not any(t.dst in self.finals for t in self.transitions)

    def step(self, active: frozenset[int], env: Mapping[str, object]) -> tuple[frozenset[int], bool]:
        """One cycle: the next active set and whether a final state was entered."""
        pre = active | {INIT}
        nxt = set()
        for t in self.transitions:
            if t.src in pre and evaluate(t.cond, env):
                nxt.add(t.dst)
        return frozenset(nxt - {INIT}), bool(nxt & self.finals)

    def accepts_at(self, trace: Iterable[Mapping[str, object]]) -> list[int]:
        """Cycles on which the monitor accepts."""
        active: frozenset[int] = frozenset()
        hits = []
        for cycle, env in enumerate(trace):
            active, accepted = self.step(active, env)
            if accepted:
                hits.append(cycle)
        return hits


@dataclass
class _Fragment:
    starts: list[tuple[Expr, int]]
    edges: list[tuple[int, Expr, int]]
    finals: set[int]
    nullable: bool


class _Builder:
    def __init__(self):
        self.count = 1  # state 0 is INIT

    def new_state(self) -> int:
        self.count += 1
        return self.count - 1

    def build(self, seq: Seq) -> _Fragment:
        if isinstance(seq, Atom):
            s = self.new_state()
            return _Fragment([(seq.cond, s)], [], {s}, False)
        if isinstance(seq, Concat):
            a, b = self.build(seq.a), self.build(seq.b)
            starts = a.starts + (b.starts if a.nullable else [])
            links = [(f, c, t) for f in a.finals for c, t in b.starts]
            finals = b.finals | (a.finals if b.nullable else set())
            return _Fragment(starts, a.edges + b.edges + links, finals, a.nullable and b.nullable)
        if isinstance(seq, RepInf):
            a = self.build(seq.a)
            loops = [(f, c, t) for f in a.finals for c, t in a.starts]
            return _Fragment(list(a.starts), a.edges + loops, set(a.finals), True)
        if isinstance(seq, Fuse):
            a, b = self.build(seq.a), self.build(seq.b)
            # the last letter of a and the first letter of b are the same cycle
            starts = [(and_(c1, c2), t) for c1, f in a.starts if f in a.finals for c2, t in b.starts]
            fused = [(s, and_(c1, c2), t) for s, c1, f in a.edges if f in a.finals for c2, t in b.starts]
            return _Fragment(a.starts + starts, a.edges + fused + b.edges, set(b.finals), False)
        raise TypeError(f"unknown sequence node {type(seq).__name__}")


def compile_monitor(seq: Seq) -> MonitorAutomaton:
    builder = _Builder()
    frag = builder.build(collapse_fuse(seq))
    raw = [Transition(INIT, c, t) for c, t in frag.starts] + [Transition(s, c, t) for s, c, t in frag.edges]
    raw = [t for t in raw if not is_false(t.cond)]

    # keep states reachable from INIT that can still reach a final state
    forward = {INIT}
    changed = True
    while changed:
        changed = False
        for t in raw:
            if t.src in forward and t.dst not in forward:
                forward.add(t.dst)
                changed = True
    backward = set(frag.finals)
    changed = True
    while changed:
        changed = False
        for t in raw:
            if t.dst in backward and t.src not in backward:
                backward.add(t.src)
                changed = True
    live = (forward & backward) | {INIT}
    kept = [t for t in raw if t.src in live and t.dst in live and t.dst != INIT]

    index = {INIT: INIT}
    for s in sorted(live - {INIT}):
        index[s] = len(index)
    transitions = tuple(Transition(index[t.src], t.cond, index[t.dst]) for t in kept)
    finals = frozenset(index[f] for f in frag.finals if f in live)
    return MonitorAutomaton(len(index), transitions, finals)
