"""Assumption sets restricting the hardware model to what a program can do.

Each mode extends the previous one:

    legal   fetched word decodes
    used    ... and is one of the program's encodings
    jumps   ... and sits at its own address; returns go to call sites,
            hardware loops use the program's bounds
    stack   ... and every return matches the innermost pending call
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from src.diagnostics import AssumptionError, ProgramError
from src.hdl.expr import (
    Binary,
    Const,
    Expr,
    MemRead,
    Ref,
    Ternary,
    and_,
    eq,
    fit,
    not_,
    one_of,
    or_,
    ref,
)
from src.hdl.netlist import FlatNetlist
from src.properties.property import Property, PropertyKind
from src.properties.psl import emit_psl
from src.properties.sere import Atom
from src.schemas.run import Mode
from src.schemas.target import CoreBinding
from src.software.isa import INSTR_BYTES, RET_WORD, legal_expr
from src.software.program import ProgramImage, static_call_depth, static_reach

logger = logging.getLogger(__name__)

CALL_MASK = 0xFFF
CALL_PATTERN = 0x0EF  # jal x1, <any>

STACK_SP = "aux_cs_sp"
STACK_OVERFLOW = "aux_cs_ovf"


@dataclass(frozen=True)
class AuxRegister:
    """Monitor register added to the transition system; ``init`` None starts free."""

    name: str
    width: int
    next: Expr
    init: Optional[int] = 0

    def ref(self) -> Ref:
        return ref(self.name, self.width)


@dataclass(frozen=True)
class AssumptionSet:
    mode: Mode
    constraints: tuple[Property, ...] = ()
    aux: tuple[AuxRegister, ...] = ()
    # fetch addresses the program can reach; set once the lookup table is in force
    reach: Optional[frozenset[int]] = None
    overflow: Optional[str] = None

    def extend(self, mode: Mode, other: "AssumptionSet") -> "AssumptionSet":
        return AssumptionSet(
            mode,
            self.constraints + other.constraints,
            self.aux + other.aux,
            other.reach if other.reach is not None else self.reach,
            other.overflow or self.overflow,
        )

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.constraints]

    def expressions(self) -> list[tuple[str, Expr]]:
        return [(p.name, p.body.cond) for p in self.constraints]


def _assume(name: str, cond: Expr) -> Property:
    return Property(PropertyKind.ASSUME, Atom(cond), name, origin=name)


def _port(netlist: FlatNetlist, name: Optional[str], role: str) -> Ref:
    if not name:
        raise AssumptionError(f"core binding has no {role}")
    try:
        return netlist.signal(name).ref()
    except KeyError:
        raise AssumptionError(f"{role} '{name}' is not a signal of {netlist.name}") from None


def _fetch_word(netlist: FlatNetlist, binding: CoreBinding) -> Ref:
    fetch = _port(netlist, binding.fetch_data, "fetch data port")
    if fetch.width != 32:
        raise AssumptionError(f"fetch data port '{fetch.name}' is {fetch.width} bits wide, expected 32")
    return fetch


def _register(netlist: FlatNetlist, binding: CoreBinding, index: int) -> MemRead:
    if not binding.register_file:
        raise AssumptionError("core binding has no register file")
    try:
        rf = netlist.signal(binding.register_file)
    except KeyError:
        raise AssumptionError(f"register file '{binding.register_file}' is not a signal of {netlist.name}") from None
    if not rf.is_memory:
        raise AssumptionError(f"register file '{rf.name}' is not a memory")
    return MemRead(rf.name, Const(index, max(1, (rf.depth - 1).bit_length())), rf.width)


def gen_legal(netlist: FlatNetlist, binding: CoreBinding) -> AssumptionSet:
    return AssumptionSet(Mode.LEGAL, (_assume("assume_legal", legal_expr(_fetch_word(netlist, binding))),))


def gen_used(netlist: FlatNetlist, binding: CoreBinding, program: ProgramImage) -> AssumptionSet:
    if not program.words:
        raise ProgramError("program is empty", file=program.source)
    fetch = _fetch_word(netlist, binding)
    return AssumptionSet(Mode.USED, (_assume("assume_used", one_of(fetch, program.encodings)),))


def _tainted_by_inputs(netlist: FlatNetlist) -> set[str]:
    """Signals some free input can reach structurally."""
    reached = {s.name for s in netlist.free_inputs}
    changed = True
    while changed:
        changed = False
        for a in netlist.assignments:
            if a.target.name not in reached and a.reads() & reached:
                reached.add(a.target.name)
                changed = True
    return reached


def table_expr(program: ProgramImage, addr: Expr) -> Expr:
    """Word stored at ``addr``; addresses outside the image read as zero."""
    table: Expr = Const(0, 32)
    for a, word in sorted(program.words.items(), reverse=True):
        if a >> addr.width:
            continue
        table = Ternary(eq(addr, Const(a, addr.width)), Const(word, 32), table)
    return table


def gen_memory_table(netlist: FlatNetlist, binding: CoreBinding, program: ProgramImage) -> AssumptionSet:
    if not program.words:
        raise ProgramError("program is empty", file=program.source)
    if binding.program_memory:
        tainted = _tainted_by_inputs(netlist)
        for a in netlist.drivers_of(binding.program_memory):
            if a.reads() & tainted:
                raise AssumptionError(
                    f"program memory '{binding.program_memory}' has a write port reachable from untrusted inputs",
                    a.line,
                )
    fetch = _fetch_word(netlist, binding)
    addr = _port(netlist, binding.fetch_addr, "fetch address port")
    outside = [a for a in program.words if a >> addr.width]
    if outside:
        raise AssumptionError(f"program word at 0x{outside[0]:x} lies outside the {addr.width}-bit fetch address range")
    return AssumptionSet(
        Mode.JUMPS,
        (_assume("assume_table", eq(fetch, table_expr(program, addr))),),
        reach=static_reach(program),
    )


def gen_jump_constraints(netlist: FlatNetlist, binding: CoreBinding, program: ProgramImage) -> AssumptionSet:
    if not program.has_metadata:
        raise AssumptionError(f"program '{program.source}' has no call-site or hardware-loop metadata")
    fetch = _fetch_word(netlist, binding)
    ra = _register(netlist, binding, binding.return_register)
    is_ret = eq(fetch, Const(RET_WORD, 32))
    returns = program.return_addresses
    if returns:
        ret_ok = or_(not_(is_ret), one_of(ra, returns))
    else:
        ret_ok = not_(is_ret)
    constraints = [_assume("assume_ret", ret_ok)]

    if binding.has_hwloops:
        start = _port(netlist, binding.lp_start, "hardware-loop start register")
        end = _port(netlist, binding.lp_end, "hardware-loop end register")
        count = _port(netlist, binding.lp_count, "hardware-loop counter")
        bounds = [and_(eq(start, Const(h.start, start.width)), eq(end, Const(h.end, end.width))) for h in program.hwloops]
        constraints.append(_assume("assume_hwloop", or_(eq(count, Const(0, count.width)), *bounds)))
    elif program.hwloops:
        logger.warning("Program has %d hardware loop(s) but the core binding names no loop registers", len(program.hwloops))
    return AssumptionSet(Mode.JUMPS, tuple(constraints))


def gen_call_stack(netlist: FlatNetlist, binding: CoreBinding, program: ProgramImage, depth: int) -> AssumptionSet:
    """Hardware call stack of ``depth`` entries; a call beyond it sets the overflow flag."""
    needed = static_call_depth(program)
    if depth < needed:
        raise AssumptionError(f"call stack depth {depth} is below the program's static call depth {needed}")
    depth = max(depth, 1)
    fetch = _fetch_word(netlist, binding)
    pc = _port(netlist, binding.fetch_addr, "fetch address port")
    ra = _register(netlist, binding, binding.return_register)
    width = ra.width

    sp_w = depth.bit_length()
    sp = ref(STACK_SP, sp_w)
    ovf = ref(STACK_OVERFLOW, 1)
    entries = [ref(f"aux_cs_{i}", width) for i in range(depth)]

    push = eq(Binary("&", fetch, Const(CALL_MASK, 32)), Const(CALL_PATTERN, 32))
    pop = eq(fetch, Const(RET_WORD, 32))
    full = eq(sp, Const(depth, sp_w))
    empty = eq(sp, Const(0, sp_w))
    ret_addr = fit(Binary("+", fit(pc, width), Const(INSTR_BYTES, width)), width)

    sp_next = Ternary(
        and_(push, not_(full)),
        Binary("+", sp, Const(1, sp_w)),
        Ternary(and_(pop, not_(empty)), Binary("-", sp, Const(1, sp_w)), sp),
    )
    aux = [AuxRegister(STACK_SP, sp_w, sp_next), AuxRegister(STACK_OVERFLOW, 1, or_(ovf, and_(push, full)))]
    for i, entry in enumerate(entries):
        aux.append(AuxRegister(entry.name, width, Ternary(and_(push, eq(sp, Const(i, sp_w))), ret_addr, entry)))

    top: Expr = Const(0, width)
    for i, entry in reversed(list(enumerate(entries))):
        top = Ternary(eq(sp, Const(i + 1, sp_w)), entry, top)
    matched = or_(not_(pop), ovf, and_(not_(empty), eq(ra, top)))
    return AssumptionSet(Mode.STACK, (_assume("assume_stack", matched),), tuple(aux), overflow=STACK_OVERFLOW)


def assumptions_for(
    mode: Mode,
    netlist: FlatNetlist,
    binding: Optional[CoreBinding],
    program: Optional[ProgramImage] = None,
    call_stack_depth: int = 8,
) -> AssumptionSet:
    """Cumulative assumption set for one verification mode."""
    if mode == Mode.FULL:
        raise ValueError("mode full is a schedule of modes, not an assumption set")
    result = AssumptionSet(Mode.NONE)
    if mode == Mode.NONE:
        return result
    if binding is None:
        raise AssumptionError(f"mode {mode.value} needs a core binding in the target config")
    result = result.extend(Mode.LEGAL, gen_legal(netlist, binding))
    if mode.rank < Mode.USED.rank:
        return result
    if program is None:
        raise AssumptionError(f"mode {mode.value} needs a program")
    result = result.extend(Mode.USED, gen_used(netlist, binding, program))
    if mode.rank < Mode.JUMPS.rank:
        return result
    result = result.extend(Mode.JUMPS, gen_memory_table(netlist, binding, program))
    result = result.extend(Mode.JUMPS, gen_jump_constraints(netlist, binding, program))
    if mode.rank < Mode.STACK.rank:
        return result
    result = result.extend(Mode.STACK, gen_call_stack(netlist, binding, program, call_stack_depth))
    logger.info("Mode %s: %d assumption(s), %d aux register(s)", mode.value, len(result.constraints), len(result.aux))
    return result



def assumption_psl(aset: AssumptionSet) -> str:
    """Audit text: every assume directive, aux registers listed as comments."""
    lines = [f"// mode {aset.mode.value}"]
    for r in aset.aux:
        init = "free" if r.init is None else str(r.init)
        lines.append(f"// aux {r.name} [{r.width - 1}:0] init {init}")
    lines.extend(emit_psl(p) for p in aset.constraints)
    return "\n".join(lines) + "\n"


def write_assumptions(aset: AssumptionSet, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(assumption_psl(aset))
    return path
