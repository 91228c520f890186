"""From a leakage path to a cover sequence.

A path is cut after every sequential edge. Within a block the secret moves
through combinational logic in one cycle, so the block's activation is the
fusion of its edge conditions; between blocks the terminating register must
keep its value (alive) for zero or more cycles.
"""

from dataclasses import dataclass
from typing import Mapping, Optional

from src.hdl.expr import TRUE, Const, Expr, Ref, and_, eq, fold, is_true, not_, or_, substitute
from src.hdl.netlist import FlatNetlist, SignalDecl
from src.ifa.edges import AssignmentEdge
from src.ifa.paths import LeakagePath
from src.properties.property import HeldAddress, Property, PropertyKind, held_name
from src.properties.sere import Atom, Concat, RepInf, Seq, concat_all, fuse_all

Held = Mapping[str, Ref]


@dataclass(frozen=True)
class SequentialBlock:
    edges: tuple[AssignmentEdge, ...]
    terminator: Optional[str]  # clocked signal closing the block; None for a combinational tail


@dataclass(frozen=True)
class BoolCond:
    expression: Expr
    kind: str  # active | alive | block-active


def split_blocks(path: LeakagePath) -> list[SequentialBlock]:
    blocks: list[SequentialBlock] = []
    current: list[AssignmentEdge] = []
    for edge in path.edges:
        current.append(edge)
        if edge.sequential:
            blocks.append(SequentialBlock(tuple(current), edge.dst.name))
            current = []
    if current:
        blocks.append(SequentialBlock(tuple(current), None))
    return blocks


def with_reset_inactive(e: Expr, netlist: FlatNetlist) -> Expr:
    """Tie reset to its inactive value and simplify."""
    if netlist.reset_name:
        e = substitute(e, {netlist.reset_name: Const(netlist.reset_inactive, 1)})
    return fold(e)


def active_condition(edge: AssignmentEdge, netlist: FlatNetlist, held: Optional[Held] = None) -> BoolCond:
    held = held or {}
    alternatives = []
    for act in edge.activations:
        terms = [act.condition]
        if act.read_addr is not None and edge.src.name in held:
            terms.append(eq(act.read_addr, held[edge.src.name]))
        if act.write_addr is not None and edge.dst.name in held:
            terms.append(eq(act.write_addr, held[edge.dst.name]))
        alternatives.append(and_(*terms))
    return BoolCond(with_reset_inactive(or_(*alternatives), netlist), "active")


def alive_condition(reg: SignalDecl, netlist: FlatNetlist, held: Optional[Held] = None) -> BoolCond:
    """No write to ``reg`` (to the held word, for a memory) fires this cycle."""
    held = held or {}
    writes = []
    for a in netlist.drivers_of(reg.name):
        if not a.clocked:
            continue
        if reg.is_memory and reg.name in held:
            writes.append(and_(a.condition, eq(a.target.addr, held[reg.name])))
        else:
            writes.append(a.condition)
    return BoolCond(with_reset_inactive(not_(or_(*writes)), netlist), "alive")


def block_sequence(block: SequentialBlock, netlist: FlatNetlist, held: Optional[Held] = None) -> Seq:
    atoms = []
    for edge in block.edges:
        cond = active_condition(edge, netlist, held).expression
        if not is_true(cond):
            atoms.append(Atom(cond))
    return fuse_all(atoms) if atoms else Atom(TRUE)


def build_sequence(blocks: list[SequentialBlock], netlist: FlatNetlist, held: Optional[Held] = None) -> Seq:
    parts: list[Seq] = []
    for i, block in enumerate(blocks):
        parts.append(block_sequence(block, netlist, held))
        if i < len(blocks) - 1:
            reg = netlist.signal(block.terminator)
            parts.append(RepInf(Atom(alive_condition(reg, netlist, held).expression)))
    return concat_all(parts)


def held_addresses(path: LeakagePath, netlist: FlatNetlist) -> tuple[HeldAddress, ...]:
    """One frozen address per memory the path passes through."""
    out = []
    for edge in path.edges:
        decl = netlist.signal(edge.dst.name)
        if decl.is_memory and edge.sequential:
            out.append(HeldAddress(held_name(decl.name), decl.name, max(1, (decl.depth - 1).bit_length()), decl.depth))
    for edge in path.edges[:1]:
        decl = netlist.signal(edge.src.name)
        if decl.is_memory:
            out.append(HeldAddress(held_name(decl.name), decl.name, max(1, (decl.depth - 1).bit_length()), decl.depth))
    return tuple(out)


def build_property(path: LeakagePath, netlist: FlatNetlist) -> Property:
    aux = held_addresses(path, netlist)
    held = {h.memory: h.ref() for h in aux}
    body = build_sequence(split_blocks(path), netlist, held)
    return Property(
        PropertyKind.COVER,
        body,
        name=f"cover_{path.id}",
        origin=path.id,
        clock=netlist.clock_name,
        aux=aux,
        source=str(path.source),
        sink=str(path.sink),
    )


def block_count(prop_or_path) -> int:
    if isinstance(prop_or_path, LeakagePath):
        return len(split_blocks(prop_or_path))
    return sum(1 for n in prop_or_path.body.nodes() if isinstance(n, RepInf)) + 1


def sequence_skeleton(seq: Seq) -> list[str]:
    """Operator tokens in emission order, for structural comparisons."""
    if isinstance(seq, Atom):
        return []
    if isinstance(seq, Concat):
        return sequence_skeleton(seq.a) + [";"] + sequence_skeleton(seq.b)
    if isinstance(seq, RepInf):
        return sequence_skeleton(seq.a) + ["[*]"]
    return sequence_skeleton(seq.a) + [":"] + sequence_skeleton(seq.b)
