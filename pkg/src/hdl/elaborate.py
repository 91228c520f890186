"""Elaboration: inline the hierarchy of a ModuleTree into a FlatNetlist.

Names of the top module keep their bare form; everything below is prefixed
with the instance path, e.g. ``top.u1.a``. if/case nests become one condition
conjunction per assignment, with sibling conditions mutually exclusive.
"""

import logging
import time
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Optional

from src.diagnostics import (
    CombinationalCycle,
    ElaborationError,
    MultipleClocks,
    UnresolvedInstance,
    UnsupportedConstruct,
    WidthMismatch,
)
from src.hdl import tree as T
from src.hdl.expr import (
    TRUE,
    Binary,
    Concat,
    Const,
    Expr,
    MemRead,
    Ref,
    Ternary,
    Trunc,
    Unary,
    and_,
    eq,
    fit,
    fold,
    is_false,
    is_true,
    mask,
    not_,
    or_,
    ref,
    signal_names,
    truth,
)
from src.hdl.netlist import Assignment, FlatNetlist, SignalDecl, SignalKind, Target, Timing

logger = logging.getLogger(__name__)

UNSIZED_WIDTH = 32
# Reset input names and whether they are active high.
RESET_NAMES = {"rst": True, "reset": True, "rst_n": False, "resetn": False}
CLOCK_NAMES = ("clk", "clock")
REG_SUFFIX = "__reg"


@dataclass
class _Decl:
    name: str
    width: int
    depth: int = 1
    is_array: bool = False
    direction: Optional[str] = None  # set for top-level ports only
    unused: bool = False
    loc: T.Loc = T.NOWHERE


@dataclass
class _Raw:
    target: Target
    source: Expr
    condition: Expr
    clocked: bool
    process: int
    blocking: bool
    loc: T.Loc = T.NOWHERE

    def reads(self) -> set[str]:
        names = signal_names(self.source) | signal_names(self.condition)
        if self.target.addr is not None:
            names |= signal_names(self.target.addr)
        return names


@dataclass
class _Scope:
    module: T.ModuleDef
    prefix: str
    top: bool
    params: dict[str, int] = field(default_factory=dict)
    names: dict[str, str] = field(default_factory=dict)
    instances: set[str] = field(default_factory=set)

    def full(self, local: str) -> str:
        return local if self.top else f"{self.prefix}.{local}"


class _Elaborator:
    def __init__(self, tree: T.ModuleTree):
        self.tree = tree
        self.file = tree.file
        self.decls: dict[str, _Decl] = {}
        self.raws: list[_Raw] = []
        self.clocks: list[tuple[str, T.Loc]] = []
        self._processes = 0

    # --- helpers ---

    def _at(self, cls, message: str, loc: T.Loc):
        return cls(message, loc.line, loc.column, self.file)

    def _new_process(self) -> int:
        self._processes += 1
        return self._processes - 1

    def _lookup(self, scope: _Scope, name: str, loc: T.Loc) -> _Decl:
        full = scope.names.get(name)
        if full is None:
            raise self._at(ElaborationError, f"undeclared signal '{name}' in module '{scope.module.name}'", loc)
        return self.decls[full]

    def _const(self, scope: _Scope, e: T.AstExpr, what: str) -> int:
        value = fold(self.expr(scope, e))
        if not isinstance(value, Const):
            raise self._at(UnsupportedConstruct, f"non-constant {what}", getattr(e, "loc", T.NOWHERE))
        return value.value

    def _check_bits(self, decl: _Decl, msb: int, lsb: int, loc: T.Loc) -> None:
        if not 0 <= lsb <= msb < decl.width:
            raise self._at(
                WidthMismatch, f"select [{msb}:{lsb}] out of range for '{decl.name}' [{decl.width - 1}:0]", loc
            )

    def _width(self, scope: _Scope, rng: Optional[T.Range], loc: T.Loc) -> int:
        if rng is None:
            return 1
        msb = self._const(scope, rng.msb, "range bound")
        lsb = self._const(scope, rng.lsb, "range bound")
        if lsb != 0 or msb < lsb:
            raise self._at(UnsupportedConstruct, "vector range other than [msb:0]", loc)
        return msb + 1

    # --- declarations ---

    def _declare(self, scope: _Scope, name: str, rng, array, loc: T.Loc, direction=None, unused=False) -> None:
        if name in scope.names or name in scope.params:
            raise self._at(ElaborationError, f"'{name}' declared twice in module '{scope.module.name}'", loc)
        width = self._width(scope, rng, loc)
        depth = 1
        if array is not None:
            a = self._const(scope, array.msb, "memory bound")
            b = self._const(scope, array.lsb, "memory bound")
            if min(a, b) != 0:
                raise self._at(UnsupportedConstruct, "memory range not starting at word 0", loc)
            depth = abs(a - b) + 1
        full = scope.full(name)
        scope.names[name] = full
        self.decls[full] = _Decl(full, width, depth, array is not None, direction if scope.top else None, unused, loc)

    # --- expressions ---

    def expr(self, scope: _Scope, e: T.AstExpr) -> Expr:
        if isinstance(e, T.Num):
            return Const(e.value, e.width or UNSIZED_WIDTH)
        if isinstance(e, T.Id):
            if e.name in scope.params:
                return Const(scope.params[e.name], UNSIZED_WIDTH)
            decl = self._lookup(scope, e.name, e.loc)
            if decl.is_array:
                raise self._at(UnsupportedConstruct, f"whole-memory reference '{e.name}'", e.loc)
            return ref(decl.name, decl.width)
        if isinstance(e, T.Index):
            decl = self._lookup(scope, e.name, e.loc)
            if decl.is_array:
                return MemRead(decl.name, self.expr(scope, e.index), decl.width)
            index = fold(self.expr(scope, e.index))
            if isinstance(index, Const):
                self._check_bits(decl, index.value, index.value, e.loc)
                return Ref(decl.name, index.value, index.value, decl.width)
            return Trunc(Binary(">>", ref(decl.name, decl.width), index), 1)
        if isinstance(e, T.PartSelect):
            decl = self._lookup(scope, e.name, e.loc)
            if decl.is_array:
                raise self._at(UnsupportedConstruct, "part-select of a memory", e.loc)
            msb = self._const(scope, e.msb, "part-select bound")
            lsb = self._const(scope, e.lsb, "part-select bound")
            self._check_bits(decl, msb, lsb, e.loc)
            return Ref(decl.name, msb, lsb, decl.width)
        if isinstance(e, T.Un):
            return Unary(e.op, self.expr(scope, e.a))
        if isinstance(e, T.Bin):
            return Binary(e.op, self.expr(scope, e.a), self.expr(scope, e.b))
        if isinstance(e, T.Cond):
            return Ternary(self.expr(scope, e.cond), self.expr(scope, e.a), self.expr(scope, e.b))
        if isinstance(e, T.Cat):
            return Concat(tuple(self.expr(scope, p) for p in e.parts))
        if isinstance(e, T.Rep):
            count = self._const(scope, e.count, "replication count")
            if count < 1:
                raise self._at(UnsupportedConstruct, "replication count below 1", e.loc)
            return Concat(tuple(self.expr(scope, p) for p in e.parts) * count)
        raise TypeError(f"not an expression: {type(e).__name__}")

    def _target(self, scope: _Scope, lv: T.LValue) -> Target:
        if lv.name in scope.params:
            raise self._at(ElaborationError, f"assignment to parameter '{lv.name}'", lv.loc)
        decl = self._lookup(scope, lv.name, lv.loc)
        if decl.is_array:
            if lv.index is None:
                raise self._at(UnsupportedConstruct, "memory assignment without a word address", lv.loc)
            return Target(decl.name, decl.width - 1, 0, self.expr(scope, lv.index))
        if lv.index is not None:
            bit = fold(self.expr(scope, lv.index))
            if not isinstance(bit, Const):
                raise self._at(UnsupportedConstruct, "dynamic bit-select on the left-hand side", lv.loc)
            self._check_bits(decl, bit.value, bit.value, lv.loc)
            return Target(decl.name, bit.value, bit.value)
        if lv.msb is not None:
            msb = self._const(scope, lv.msb, "part-select bound")
            lsb = self._const(scope, lv.lsb, "part-select bound")
            self._check_bits(decl, msb, lsb, lv.loc)
            return Target(decl.name, msb, lsb)
        return Target(decl.name, decl.width - 1, 0)

    # --- statements ---

    def _emit(self, scope, lhs: T.LValue, rhs: T.AstExpr, cond: Expr, clocked: bool, process: int, blocking: bool):
        if is_false(cond):
            return
        target = self._target(scope, lhs)
        source = fit(self.expr(scope, rhs), target.width)
        self.raws.append(_Raw(target, source, cond, clocked, process, blocking, lhs.loc))

    def _flatten(self, scope: _Scope, stmt: T.Stmt, cond: Expr, clocked: bool, process: int) -> None:
        if isinstance(stmt, T.Assign):
            self._emit(scope, stmt.lhs, stmt.rhs, cond, clocked, process, not stmt.nonblocking)
        elif isinstance(stmt, T.Block):
            for inner in stmt.stmts:
                self._flatten(scope, inner, cond, clocked, process)
        elif isinstance(stmt, T.If):
            c = truth(self.expr(scope, stmt.cond))
            self._flatten(scope, stmt.then, and_(cond, c), clocked, process)
            if stmt.orelse is not None:
                self._flatten(scope, stmt.orelse, and_(cond, not_(c)), clocked, process)
        elif isinstance(stmt, T.Case):
            self._case(scope, stmt, cond, clocked, process)
        else:
            raise TypeError(f"not a statement: {type(stmt).__name__}")

    def _case(self, scope: _Scope, stmt: T.Case, cond: Expr, clocked: bool, process: int) -> None:
        subject = self.expr(scope, stmt.subject)
        defaults = [item for item in stmt.items if item.labels is None]
        if len(defaults) > 1:
            raise self._at(ElaborationError, "case statement with more than one default", stmt.loc)
        arms = [(item, [fold(self.expr(scope, label)) for label in item.labels]) for item in stmt.items if item.labels]
        constant = all(isinstance(label, Const) for _, labels in arms for label in labels)

        # Constant labels: earlier arms already exclude later ones except for repeated values.
        seen_values: list[int] = []
        earlier: list[Expr] = []
        for item, labels in arms:
            if constant:
                fresh = []
                for label in labels:
                    if label.value <= mask(subject.width) and label.value not in seen_values and label.value not in fresh:
                        fresh.append(label.value)
                seen_values.extend(fresh)
                arm = or_(*[eq(subject, Const(v, subject.width)) for v in fresh])
            else:
                match = or_(*[Binary("==", subject, label) for label in labels])
                arm = and_(match, *[not_(e) for e in earlier])
                earlier.append(match)
            self._flatten(scope, item.body, and_(cond, arm), clocked, process)
        if defaults:
            if constant:
                rest = and_(*[Binary("!=", subject, Const(v, subject.width)) for v in seen_values])
            else:
                rest = and_(*[not_(e) for e in earlier])
            self._flatten(scope, defaults[0].body, and_(cond, rest), clocked, process)

    def _always(self, scope: _Scope, item: T.Always) -> None:
        process = self._new_process()
        clocked = item.clock is not None
        if clocked:
            decl = self._lookup(scope, item.clock, item.loc)
            self.clocks.append((decl.name, item.loc))
        start = len(self.raws)
        self._flatten(scope, item.body, TRUE, clocked, process)
        emitted = self.raws[start:]
        reads: set[str] = set()
        for raw in emitted:
            reads |= raw.reads()
        if not clocked:
            looped = sorted({r.target.name for r in emitted} & reads)
            if looped:
                raise self._at(
                    UnsupportedConstruct, f"combinational always block reads '{looped[0]}', which it assigns", item.loc
                )
        else:
            looped = sorted({r.target.name for r in emitted if r.blocking} & reads)
            if looped:
                raise self._at(
                    UnsupportedConstruct, f"blocking assignment to '{looped[0]}' read in the same clocked block", item.loc
                )

    # --- hierarchy ---

    def instantiate(self, module: T.ModuleDef, prefix: str, top: bool, overrides: dict[str, int], stack: tuple) -> _Scope:
        if module.name in stack:
            raise self._at(ElaborationError, f"recursive instantiation of '{module.name}'", module.loc)
        scope = _Scope(module, prefix, top)
        body_params = [item for item in module.items if isinstance(item, T.ParamDecl)]
        overridable = {p.name for p in module.params} | {p.name for p in body_params if not p.local}
        unknown = sorted(set(overrides) - overridable)
        if unknown:
            raise self._at(ElaborationError, f"module '{module.name}' has no parameter '{unknown[0]}'", module.loc)
        for param in list(module.params) + body_params:
            if param.name in scope.params:
                raise self._at(ElaborationError, f"parameter '{param.name}' declared twice", param.loc)
            if param.name in overrides:
                scope.params[param.name] = overrides[param.name]
            else:
                scope.params[param.name] = self._const(scope, param.value, f"parameter '{param.name}'")

        for port in module.ports:
            self._declare(scope, port.name, port.range, None, port.loc, port.direction, port.unused)
        for item in module.items:
            if isinstance(item, T.NetDecl):
                port = module.port(item.name)
                if port is not None and item.array is None:
                    if self._width(scope, item.range, item.loc) != self.decls[scope.names[item.name]].width:
                        raise self._at(WidthMismatch, f"redeclaration of port '{item.name}' with another width", item.loc)
                    continue
                self._declare(scope, item.name, item.range, item.array, item.loc)

        for item in module.items:
            if isinstance(item, T.ContAssign):
                self._emit(scope, item.lhs, item.rhs, TRUE, False, self._new_process(), True)
            elif isinstance(item, T.Always):
                self._always(scope, item)
            elif isinstance(item, T.Instance):
                self._instance(scope, item, stack + (module.name,))
        return scope

    def _instance(self, scope: _Scope, inst: T.Instance, stack: tuple) -> None:
        module = self.tree.module(inst.module)
        if module is None:
            raise self._at(UnresolvedInstance, f"unresolved instance '{inst.name}' of module '{inst.module}'", inst.loc)
        if inst.name in scope.instances or inst.name in scope.names:
            raise self._at(ElaborationError, f"instance name '{inst.name}' already used", inst.loc)
        scope.instances.add(inst.name)
        overrides = {name: self._const(scope, value, f"override of '{name}'") for name, value in inst.params}
        child = self.instantiate(module, f"{scope.prefix}.{inst.name}", False, overrides, stack)
        for port_name, value in inst.conns:
            port = module.port(port_name)
            if port is None:
                raise self._at(ElaborationError, f"module '{module.name}' has no port '{port_name}'", inst.loc)
            if value is None:
                continue
            inner = self.decls[child.names[port_name]]
            process = self._new_process()
            if port.direction == "input":
                source = fit(self.expr(scope, value), inner.width)
                self.raws.append(_Raw(Target(inner.name, inner.width - 1, 0), source, TRUE, False, process, True, inst.loc))
            else:
                target = self._target(scope, _as_lvalue(value, self.file))
                if target.addr is not None:
                    raise self._at(UnsupportedConstruct, "output port connected to a memory word", inst.loc)
                source = fit(ref(inner.name, inner.width), target.width)
                self.raws.append(_Raw(target, source, TRUE, False, process, True, inst.loc))

    # --- final assembly ---

    def _alias_root(self, name: str, drivers: dict[str, list[_Raw]]) -> str:
        seen = {name}
        while True:
            raws = drivers.get(name, [])
            if len(raws) != 1:
                return name
            raw = raws[0]
            src = raw.source
            if raw.clocked or not is_true(raw.condition) or not isinstance(src, Ref) or not src.full:
                return name
            if src.name in seen:
                return name
            name = src.name
            seen.add(name)

    def build(self, top: T.ModuleDef) -> FlatNetlist:
        drivers: dict[str, list[_Raw]] = {}
        for raw in self.raws:
            drivers.setdefault(raw.target.name, []).append(raw)
        clocked = {r.target.name for r in self.raws if r.clocked}
        comb = {r.target.name for r in self.raws if not r.clocked}

        for name in sorted(clocked & comb):
            raise self._at(ElaborationError, f"'{name}' is driven both combinationally and under the clock", self.decls[name].loc)
        for name, raws in drivers.items():
            decl = self.decls[name]
            if decl.direction == "input":
                raise self._at(ElaborationError, f"input port '{name}' is assigned", raws[0].loc)
        for decl in self.decls.values():
            if not decl.is_array:
                continue
            if decl.name not in clocked:
                raise self._at(UnsupportedConstruct, f"memory '{decl.name}' without a clocked write port", decl.loc)
            if len({r.process for r in drivers[decl.name]}) > 1:
                raise self._at(UnsupportedConstruct, f"memory '{decl.name}' written from more than one process", decl.loc)
        for decl in self.decls.values():
            if decl.direction == "output" and decl.name not in drivers and not decl.unused:
                raise self._at(ElaborationError, f"output '{decl.name}' is never assigned; mark it (* unused *)", decl.loc)

        clock = self._resolve_clock(drivers)

        # Top-level output registers become <name>__reg plus a wire.
        split = [d.name for d in self.decls.values() if d.direction == "output" and d.name in clocked]
        raws = list(self.raws)
        for name in split:
            reg_name = name + REG_SUFFIX
            if reg_name in self.decls:
                raise ElaborationError(f"'{reg_name}' clashes with a generated register name", file=self.file)
            width = self.decls[name].width
            raws = [
                _Raw(Target(reg_name, r.target.msb, r.target.lsb), r.source, r.condition, True, r.process, r.blocking, r.loc)
                if r.clocked and r.target.name == name
                else r
                for r in raws
            ]
            raws.append(_Raw(Target(name, width - 1, 0), ref(reg_name, width), TRUE, False, self._new_process(), True))
        clocked = {r.target.name for r in raws if r.clocked}

        signals: list[tuple[_Decl, SignalKind]] = []
        for decl in self.decls.values():
            signals.append((decl, self._kind(decl, clocked)))
            if decl.name in split:
                signals.append((_Decl(decl.name + REG_SUFFIX, decl.width, loc=decl.loc), SignalKind.REGISTER))
        ids = {decl.name: i for i, (decl, _) in enumerate(signals)}

        reset = None
        for decl, kind in signals:
            if kind == SignalKind.INPUT and decl.name in RESET_NAMES and decl.width == 1:
                reset = (ids[decl.name], RESET_NAMES[decl.name])
                break
        inits = self._reset_values(raws, reset, signals, drivers) if reset else {}

        decls = tuple(
            SignalDecl(
                id=ids[decl.name],
                name=decl.name,
                width=decl.width,
                kind=kind,
                depth=decl.depth,
                unused=decl.unused,
                init=inits.get(decl.name),
            )
            for decl, kind in signals
        )
        assignments = tuple(
            Assignment(
                id=i,
                target=r.target,
                source=r.source,
                condition=r.condition,
                timing=Timing.CLOCKED if r.clocked else Timing.COMBINATIONAL,
                order=i,
                process=r.process,
                line=r.loc.line,
            )
            for i, r in enumerate(raws)
        )
        comb_order = _comb_order(assignments)
        clock_id = ids[clock] if clock is not None else None
        return FlatNetlist(top.name, decls, assignments, clock_id, reset, comb_order)

    def _kind(self, decl: _Decl, clocked: set[str]) -> SignalKind:
        if decl.direction == "input":
            return SignalKind.INPUT
        if decl.direction == "output":
            return SignalKind.OUTPUT
        if decl.is_array:
            return SignalKind.MEMORY
        if decl.name in clocked:
            return SignalKind.REGISTER
        return SignalKind.WIRE

    def _resolve_clock(self, drivers: dict[str, list[_Raw]]) -> Optional[str]:
        roots: dict[str, T.Loc] = {}
        for name, loc in self.clocks:
            roots.setdefault(self._alias_root(name, drivers), loc)
        if len(roots) > 1:
            names = sorted(roots)
            raise self._at(MultipleClocks, f"multiple clock domains: {', '.join(names)}", roots[names[1]])
        if roots:
            root, loc = next(iter(roots.items()))
            if self.decls[root].direction != "input" or self.decls[root].width != 1:
                raise self._at(ElaborationError, f"clock '{root}' is not a 1-bit primary input", loc)
            return root
        for decl in self.decls.values():
            if decl.direction == "input" and decl.name in CLOCK_NAMES:
                return decl.name
        return None

    def _reset_values(self, raws, reset, signals, drivers) -> dict[str, int]:
        rst_id, active_high = reset
        rst_name = signals[rst_id][0].name
        active = Const(1 if active_high else 0, 1)
        inits: dict[str, int] = {}
        for raw in raws:
            if not raw.clocked or raw.target.addr is not None:
                continue
            width = next(d.width for d, _ in signals if d.name == raw.target.name)
            if raw.target.width != width or not isinstance(raw.source, Const):
                continue
            c = raw.condition
            if (
                isinstance(c, Binary)
                and c.op == "=="
                and isinstance(c.a, Ref)
                and c.a.full
                and c.b == active
                and self._alias_root(c.a.name, drivers) == rst_name
            ):
                inits.setdefault(raw.target.name, raw.source.value)
        return inits


def _as_lvalue(e: T.AstExpr, file: str) -> T.LValue:
    if isinstance(e, T.Id):
        return T.LValue(e.name, loc=e.loc)
    if isinstance(e, T.Index):
        return T.LValue(e.name, index=e.index, loc=e.loc)
    if isinstance(e, T.PartSelect):
        return T.LValue(e.name, msb=e.msb, lsb=e.lsb, loc=e.loc)
    loc = getattr(e, "loc", T.NOWHERE)
    raise UnsupportedConstruct("output port connected to an expression", loc.line, loc.column, file)


def _comb_order(assignments: tuple[Assignment, ...]) -> tuple[str, ...]:
    comb = sorted({a.target.name for a in assignments if not a.clocked})
    preds: dict[str, set[str]] = {name: set() for name in comb}
    for a in assignments:
        if not a.clocked:
            preds[a.target.name] |= {s for s in a.reads() if s in preds}
    sorter = TopologicalSorter({name: sorted(preds[name]) for name in comb})
    try:
        return tuple(sorter.static_order())
    except CycleError as e:
        raise CombinationalCycle(sorted(set(e.args[1]))) from None


def pick_top(tree: T.ModuleTree, top: Optional[str] = None) -> T.ModuleDef:
    names = [m.name for m in tree.modules]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ElaborationError(f"module '{dupes[0]}' defined twice", file=tree.file)
    if top is not None:
        module = tree.module(top)
        if module is None:
            raise UnresolvedInstance(f"top module '{top}' not found", file=tree.file)
        return module
    instantiated = {item.module for m in tree.modules for item in m.items if isinstance(item, T.Instance)}
    roots = [m for m in tree.modules if m.name not in instantiated]
    if len(roots) != 1:
        raise ElaborationError(f"expected a single top module, found {sorted(m.name for m in roots)}", file=tree.file)
    return roots[0]


def elaborate(tree: T.ModuleTree, top: Optional[str] = None) -> FlatNetlist:
    """Inline the hierarchy below the top module and flatten its processes."""
    start = time.perf_counter()
    module = pick_top(tree, top)
    elaborator = _Elaborator(tree)
    elaborator.instantiate(module, module.name, True, {}, ())
    netlist = elaborator.build(module)
    logger.info(
        "Elaborated %s: %d signals, %d assignments, %d state bits in %.0fms",
        netlist.name,
        len(netlist.signals),
        len(netlist.assignments),
        netlist.state_bits,
        (time.perf_counter() - start) * 1000,
    )
    return netlist
