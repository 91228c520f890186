"""Concrete execution of a program on a core netlist.

The program memory is bound to the image, and the data and key memories are
modelled here with words drawn from a seeded generator. Every cycle the
assumption set is evaluated against the live signal values, which is how
generated assumptions are validated against real behaviour.
"""

import logging
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from src.hdl.expr import evaluate, mask
from src.hdl.netlist import FlatNetlist
from src.hdl.simulate import Simulator
from src.schemas.target import CoreBinding
from src.software.assumptions import AssumptionSet
from src.software.program import ProgramImage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    cycle: int
    assumption: str
    address: int


@dataclass
class ExecutionResult:
    cycles: int
    fetches: list[int] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    stores: dict[int, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def _value(env: dict, name: Optional[str]) -> int:
    return int(env.get(name, 0)) if name else 0


def run_program(
    netlist: FlatNetlist,
    binding: CoreBinding,
    program: ProgramImage,
    cycles: int,
    assumptions: Optional[AssumptionSet] = None,
    seed: int = 0,
) -> ExecutionResult:
    started = time.perf_counter()
    rng = random.Random(seed)
    sim = Simulator(netlist)
    state = sim.initial_state()
    data: dict[int, int] = {}
    keys: dict[int, int] = {}
    aux = {r.name: (r.init or 0) for r in assumptions.aux} if assumptions else {}
    checks = assumptions.expressions() if assumptions else []
    other_inputs = [
        s for s in netlist.free_inputs if s.name not in (binding.fetch_data, binding.data_rdata, binding.key_rdata)
    ]
    result = ExecutionResult(cycles)

    def word(memory: dict[int, int], addr: int) -> int:
        if addr not in memory:
            memory[addr] = rng.getrandbits(32)
        return memory[addr]

    for cycle in range(cycles):
        inputs = {s.name: rng.getrandbits(s.width) for s in other_inputs}
        env = sim.evaluate_cycle(state, inputs)
        pc = _value(env, binding.fetch_addr)
        inputs[binding.fetch_data] = program.words.get(pc, 0)
        env = sim.evaluate_cycle(state, inputs)
        if binding.data_rdata:
            inputs[binding.data_rdata] = word(data, _value(env, binding.data_addr))
        if binding.key_rdata:
            inputs[binding.key_rdata] = word(keys, _value(env, binding.key_addr))
        if binding.data_rdata or binding.key_rdata:
            env = sim.evaluate_cycle(state, inputs)

        result.fetches.append(pc)
        full_env = {**env, **aux}
        for name, cond in checks:
            if not evaluate(cond, full_env):
                result.violations.append(Violation(cycle, name, pc))
        if binding.data_we and _value(env, binding.data_we):
            addr = _value(env, binding.data_addr)
            data[addr] = _value(env, binding.data_wdata)
            result.stores[addr] = data[addr]
        if assumptions:
            aux = {r.name: evaluate(r.next, full_env) & mask(r.width) for r in assumptions.aux}
        state = sim.next_state(env)

    logger.info(
        "Ran %s for %d cycles in %.0fms: %d assumption violation(s)",
        program.source,
        cycles,
        (time.perf_counter() - started) * 1000,
        len(result.violations),
    )
    return result
