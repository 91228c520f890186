"""Exhaustive reachability over design state x aux registers x monitor state.

Small systems only; this is the independent oracle the SAT engines are
checked against.
"""

import itertools
import logging
import time
from collections import deque
from typing import Iterator, Optional

from src.checker.monitor import MonitorAutomaton
from src.checker.ts import TransitionSystem
from src.checker.verdict import Method, Verdict, VerdictKind
from src.checker.witness import Witness, scalar_rows, simulate
from src.diagnostics import ExplicitStateLimit
from src.hdl.expr import evaluate, mask
from src.hdl.simulate import Simulator, State
from src.schemas.run import Limits

logger = logging.getLogger(__name__)

Key = tuple


def state_bits(ts: TransitionSystem, monitor: Optional[MonitorAutomaton]) -> int:
    return ts.state_bits + (monitor.state_bits if monitor else 0)


def within_budget(ts: TransitionSystem, monitor: Optional[MonitorAutomaton], limits: Limits) -> bool:
    return state_bits(ts, monitor) <= limits.explicit_state_bits and ts.input_bits <= limits.explicit_input_bits


def _initial_states(ts: TransitionSystem) -> Iterator[tuple[State, dict[str, int]]]:
    """Every initial design state and aux valuation; free parts are enumerated."""
    parts: list[tuple[str, int, int]] = []  # (name, width, depth or 0 for a scalar)
    fixed: State = {}
    for s in ts.registers:
        if s.is_memory:
            parts.append((s.name, s.width, s.depth))
        elif s.init is None:
            parts.append((s.name, s.width, 0))
        else:
            fixed[s.name] = s.init
    aux_fixed = {r.name: r.init for r in ts.aux if r.init is not None}
    aux_free = [r for r in ts.aux if r.init is None]

    ranges = []
    for _, width, depth in parts:
        ranges.extend([range(1 << width)] * max(depth, 1))
    ranges.extend(range(1 << r.width) for r in aux_free)
    for values in itertools.product(*ranges):
        state = dict(fixed)
        pos = 0
        for name, _, depth in parts:
            if depth:
                state[name] = list(values[pos : pos + depth])
                pos += depth
            else:
                state[name] = values[pos]
                pos += 1
        aux = dict(aux_fixed)
        for r in aux_free:
            aux[r.name] = values[pos]
            pos += 1
        yield state, aux


def _key(ts: TransitionSystem, state: State, aux: dict[str, int], active: frozenset[int]) -> Key:
    design = tuple(tuple(state[s.name]) if s.is_memory else state[s.name] for s in ts.registers)
    return design, tuple(aux[r.name] for r in ts.aux), tuple(sorted(active))


def explicit_oracle(
    ts: TransitionSystem,
    monitor: MonitorAutomaton,
    state_limit: int,
    input_limit: Optional[int] = None,
) -> Verdict:
    """Breadth-first search for a cycle on which the monitor accepts.

    Cycles whose inputs violate a constraint are not taken. Raises
    ExplicitStateLimit when the product is larger than the budget.
    """
    bits = state_bits(ts, monitor)
    if bits > state_limit:
        raise ExplicitStateLimit(f"{bits} state bits exceed the explicit-state budget of {state_limit}")
    if input_limit is not None and ts.input_bits > input_limit:
        raise ExplicitStateLimit(f"{ts.input_bits} input bits exceed the explicit-state budget of {input_limit}")

    start = time.perf_counter()
    sim = Simulator(ts.netlist)
    free = ts.netlist.free_inputs
    input_space = [
        dict(zip((s.name for s in free), values))
        for values in itertools.product(*(range(1 << s.width) for s in free))
    ]

    # key -> (parent key, inputs taken from the parent); roots map to (None, initial state, aux)
    parents: dict[Key, tuple] = {}
    queue: deque = deque()
    for state, aux in _initial_states(ts):
        key = _key(ts, state, aux, frozenset())
        if key not in parents:
            parents[key] = (None, state, aux)
            queue.append((key, state, aux, frozenset()))

    while queue:
        key, state, aux, active = queue.popleft()
        for inputs in input_space:
            env = sim.evaluate_cycle(state, inputs)
            full = {**env, **aux}
            if not all(evaluate(cond, full) for _, cond in ts.constraints):
                continue
            nxt_active, accepted = monitor.step(active, full)
            if accepted:
                witness = _witness(ts, parents, key, inputs)
                logger.debug(
                    "explicit: covered after %d state(s) (%.0fms)", len(parents), (time.perf_counter() - start) * 1000
                )
                return Verdict(VerdictKind.COVERED, Method.EXPLICIT, witness.length - 1, witness)
            nxt_state = sim.next_state(env)
            nxt_aux = {r.name: evaluate(r.next, full) & mask(r.width) for r in ts.aux}
            nxt_key = _key(ts, nxt_state, nxt_aux, nxt_active)
            if nxt_key not in parents:
                parents[nxt_key] = (key, inputs)
                queue.append((nxt_key, nxt_state, nxt_aux, nxt_active))

    logger.debug("explicit: %d reachable state(s), no cover (%.0fms)", len(parents), (time.perf_counter() - start) * 1000)
    return Verdict(VerdictKind.UNCOVERABLE, Method.EXPLICIT, len(parents))


def _witness(ts: TransitionSystem, parents: dict[Key, tuple], key: Key, last_inputs: dict[str, int]) -> Witness:
    inputs = [last_inputs]
    entry = parents[key]
    while entry[0] is not None:
        parent, taken = entry
        inputs.append(taken)
        entry = parents[parent]
    _, initial, aux = entry
    inputs.reverse()
    trace, _ = simulate(ts, initial, aux, inputs)
    return Witness(initial, dict(aux), inputs, scalar_rows(trace))
