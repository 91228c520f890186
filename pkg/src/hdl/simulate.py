"""Cycle-accurate two-valued simulation.

``Simulator`` runs a FlatNetlist and is the reference used for witness replay,
taint checks and assumption validation. ``TreeInterpreter`` executes the
unflattened ModuleTree procedurally and exists to cross-check elaboration.
"""

import logging
import random
from typing import Iterable, Mapping, Optional

from src.hdl import tree as T
from src.hdl.elaborate import UNSIZED_WIDTH, pick_top
from src.hdl.expr import apply_binary, evaluate, mask
from src.hdl.netlist import Assignment, FlatNetlist, SignalKind

logger = logging.getLogger(__name__)

State = dict[str, object]  # register -> int, memory -> list[int]


def write_bits(old: int, msb: int, lsb: int, value: int) -> int:
    width = msb - lsb + 1
    return (old & ~(mask(width) << lsb)) | ((value & mask(width)) << lsb)


class Simulator:
    def __init__(self, netlist: FlatNetlist):
        self.netlist = netlist
        self._comb = [(name, netlist.drivers_of(name)) for name in netlist.comb_order]
        self._clocked = [
            (s, tuple(a for a in netlist.drivers_of(s.name) if a.clocked)) for s in netlist.state_signals
        ]
        self._reset_id = netlist.reset[0] if netlist.reset else None

    def initial_state(self, rng: Optional[random.Random] = None) -> State:
        """Reset values where known; other state is zero, or random when ``rng`` is given."""
        state: State = {}
        for s in self.netlist.state_signals:
            if s.is_memory:
                state[s.name] = [rng.getrandbits(s.width) if rng else 0 for _ in range(s.depth)]
            elif s.init is not None:
                state[s.name] = s.init
            else:
                state[s.name] = rng.getrandbits(s.width) if rng else 0
        return state

    def zero_state(self) -> State:
        return {
            s.name: [0] * s.depth if s.is_memory else 0 for s in self.netlist.state_signals
        }

    def evaluate_cycle(self, state: State, inputs: Mapping[str, int]) -> dict[str, object]:
        """All signal values during one cycle (inputs, state, combinational nets)."""
        env: dict[str, object] = {}
        for s in self.netlist.signals:
            if s.kind == SignalKind.INPUT:
                default = self.netlist.reset_inactive if s.id == self._reset_id else 0
                env[s.name] = inputs.get(s.name, default) & mask(s.width)
            elif s.is_state:
                value = state[s.name]
                env[s.name] = list(value) if s.is_memory else value
            else:
                env[s.name] = 0
        for name, drivers in self._comb:
            env[name] = self._fold_writes(0, drivers, env)
        return env

    def next_state(self, env: Mapping[str, object]) -> State:
        nxt: State = {}
        for s, drivers in self._clocked:
            if s.is_memory:
                words = list(env[s.name])
                for a in drivers:
                    if evaluate(a.condition, env):
                        addr = evaluate(a.target.addr, env)
                        if addr < s.depth:
                            words[addr] = evaluate(a.source, env) & mask(s.width)
                nxt[s.name] = words
            else:
                nxt[s.name] = self._fold_writes(env[s.name], drivers, env)
        return nxt

    @staticmethod
    def _fold_writes(value: int, drivers: Iterable[Assignment], env) -> int:
        for a in drivers:
            if evaluate(a.condition, env):
                value = write_bits(value, a.target.msb, a.target.lsb, evaluate(a.source, env))
        return value

    def step(self, state: State, inputs: Mapping[str, int]) -> tuple[dict[str, object], State]:
        env = self.evaluate_cycle(state, inputs)
        return env, self.next_state(env)

    def run(self, inputs: Iterable[Mapping[str, int]], state: Optional[State] = None) -> list[dict[str, object]]:
        state = state if state is not None else self.initial_state()
        trace = []
        for frame in inputs:
            env, state = self.step(state, frame)
            trace.append(env)
        return trace

    def random_inputs(self, rng: random.Random, cycles: int) -> list[dict[str, int]]:
        free = self.netlist.free_inputs
        return [{s.name: rng.getrandbits(s.width) for s in free} for _ in range(cycles)]


# --- reference interpreter over the unflattened tree ---


class _Frame:
    """One module instance: local name resolution, parameters and processes."""

    def __init__(self, interp: "TreeInterpreter", module: T.ModuleDef, prefix: str, top: bool, overrides: dict[str, int]):
        self.interp = interp
        self.module = module
        self.prefix = prefix
        self.top = top
        self.params: dict[str, int] = {}
        self.names: dict[str, str] = {}
        for p in list(module.params) + [i for i in module.items if isinstance(i, T.ParamDecl)]:
            self.params[p.name] = overrides.get(p.name, self.const(p.value))
        for port in module.ports:
            self.declare(port.name, port.range, None)
        for item in module.items:
            if isinstance(item, T.NetDecl) and item.name not in self.names:
                self.declare(item.name, item.range, item.array)
        self.children: list[tuple[_Frame, T.Instance]] = []
        for item in module.items:
            if isinstance(item, T.Instance):
                child_module = interp.tree.module(item.module)
                child = _Frame(
                    interp,
                    child_module,
                    f"{prefix}.{item.name}",
                    False,
                    {n: self.const(v) for n, v in item.params},
                )
                self.children.append((child, item))

    def declare(self, name: str, rng: Optional[T.Range], array: Optional[T.Range]) -> None:
        full = name if self.top else f"{self.prefix}.{name}"
        self.names[name] = full
        width = 1 if rng is None else self.const(rng.msb) - self.const(rng.lsb) + 1
        self.interp.widths[full] = width
        if array is not None:
            self.interp.depths[full] = abs(self.const(array.msb) - self.const(array.lsb)) + 1

    def const(self, e: T.AstExpr) -> int:
        return self.eval(e, {})[0]

    def eval(self, e: T.AstExpr, env: Mapping[str, object]) -> tuple[int, int]:
        """(value, width) under self-determined widths."""
        if isinstance(e, T.Num):
            width = e.width or UNSIZED_WIDTH
            return e.value & mask(width), width
        if isinstance(e, T.Id):
            if e.name in self.params:
                return self.params[e.name] & mask(UNSIZED_WIDTH), UNSIZED_WIDTH
            full = self.names[e.name]
            return env[full], self.interp.widths[full]
        if isinstance(e, T.Index):
            full = self.names[e.name]
            index, _ = self.eval(e.index, env)
            width = self.interp.widths[full]
            if full in self.interp.depths:
                words = env[full]
                return (words[index] if index < len(words) else 0), width
            return (env[full] >> index) & 1 if index < width else 0, 1
        if isinstance(e, T.PartSelect):
            full = self.names[e.name]
            msb, lsb = self.const(e.msb), self.const(e.lsb)
            return (env[full] >> lsb) & mask(msb - lsb + 1), msb - lsb + 1
        if isinstance(e, T.Un):
            a, w = self.eval(e.a, env)
            return {
                "~": (~a & mask(w), w),
                "-": (-a & mask(w), w),
                "!": (int(a == 0), 1),
                "&": (int(a == mask(w)), 1),
                "|": (int(a != 0), 1),
                "^": (bin(a).count("1") & 1, 1),
            }[e.op]
        if isinstance(e, T.Bin):
            a, wa = self.eval(e.a, env)
            if e.op == "&&":
                return int(a != 0 and self.eval(e.b, env)[0] != 0), 1
            if e.op == "||":
                return int(a != 0 or self.eval(e.b, env)[0] != 0), 1
            b, wb = self.eval(e.b, env)
            if e.op in ("==", "!=", "<", "<=", ">", ">="):
                width = 1
            elif e.op in ("<<", ">>", ">>>"):
                width = wa
            else:
                width = max(wa, wb)
            return apply_binary(e.op, a, b, width), width
        if isinstance(e, T.Cond):
            c, _ = self.eval(e.cond, env)
            a, wa = self.eval(e.a, env)
            b, wb = self.eval(e.b, env)
            width = max(wa, wb)
            return (a if c else b) & mask(width), width
        if isinstance(e, (T.Cat, T.Rep)):
            parts = e.parts if isinstance(e, T.Cat) else e.parts * self.const(e.count)
            value, width = 0, 0
            for part in parts:
                v, w = self.eval(part, env)
                value = (value << w) | v
                width += w
            return value, width
        raise TypeError(f"not an expression: {type(e).__name__}")

    def write(self, lv: T.LValue, value: int, env: dict, out: dict) -> None:
        """Apply an assignment to ``out``; addresses and bounds are evaluated in ``env``."""
        full = self.names[lv.name]
        width = self.interp.widths[full]
        if full in self.interp.depths:
            addr, _ = self.eval(lv.index, env)
            if addr < self.interp.depths[full]:
                words = list(out[full])
                words[addr] = value & mask(width)
                out[full] = words
            return
        if lv.index is not None:
            bit, _ = self.eval(lv.index, env)
            out[full] = write_bits(out[full], bit, bit, value)
        elif lv.msb is not None:
            out[full] = write_bits(out[full], self.const(lv.msb), self.const(lv.lsb), value)
        else:
            out[full] = value & mask(width)

    def execute(self, stmt: T.Stmt, env: dict, out: dict, blocking_env: bool) -> None:
        if isinstance(stmt, T.Assign):
            value, _ = self.eval(stmt.rhs, env)
            self.write(stmt.lhs, value, env, out)
            if blocking_env and not stmt.nonblocking:
                self.write(stmt.lhs, value, env, env)
        elif isinstance(stmt, T.Block):
            for inner in stmt.stmts:
                self.execute(inner, env, out, blocking_env)
        elif isinstance(stmt, T.If):
            if self.eval(stmt.cond, env)[0]:
                self.execute(stmt.then, env, out, blocking_env)
            elif stmt.orelse is not None:
                self.execute(stmt.orelse, env, out, blocking_env)
        elif isinstance(stmt, T.Case):
            subject, _ = self.eval(stmt.subject, env)
            for item in stmt.items:
                if item.labels is not None and any(self.eval(l, env)[0] == subject for l in item.labels):
                    self.execute(item.body, env, out, blocking_env)
                    return
            for item in stmt.items:
                if item.labels is None:
                    self.execute(item.body, env, out, blocking_env)
                    return

    def targets(self, stmt: T.Stmt) -> set[str]:
        if isinstance(stmt, T.Assign):
            return {self.names[stmt.lhs.name]}
        if isinstance(stmt, T.Block):
            return set().union(*(self.targets(s) for s in stmt.stmts)) if stmt.stmts else set()
        if isinstance(stmt, T.If):
            return self.targets(stmt.then) | (self.targets(stmt.orelse) if stmt.orelse else set())
        if isinstance(stmt, T.Case):
            return set().union(*(self.targets(i.body) for i in stmt.items)) if stmt.items else set()
        return set()

    def walk(self):
        yield self
        for child, _ in self.children:
            yield from child.walk()


class TreeInterpreter:
    """Procedural reference semantics of the unflattened tree (last write wins)."""

    MAX_SETTLE = 1000

    def __init__(self, tree: T.ModuleTree, top: Optional[str] = None):
        self.tree = tree
        self.widths: dict[str, int] = {}
        self.depths: dict[str, int] = {}
        module = pick_top(tree, top)
        self.root = _Frame(self, module, module.name, True, {})
        self.frames = list(self.root.walk())
        self.comb_targets: set[str] = set()
        self.state: dict[str, object] = {}
        for frame in self.frames:
            for item in frame.module.items:
                if isinstance(item, T.ContAssign):
                    self.comb_targets.add(frame.names[item.lhs.name])
                elif isinstance(item, T.Always):
                    targets = frame.targets(item.body)
                    if item.clock is None:
                        self.comb_targets |= targets
                    else:
                        for name in targets:
                            self.state[name] = [0] * self.depths[name] if name in self.depths else 0
            for child, inst in frame.children:
                for port_name, value in inst.conns:
                    port = child.module.port(port_name)
                    if value is None:
                        continue
                    if port.direction == "input":
                        self.comb_targets.add(child.names[port_name])
                    else:
                        self.comb_targets.add(frame.names[value.name])

    def _comb_pass(self, env: dict) -> dict:
        out = {name: 0 for name in self.comb_targets}
        for frame in self.frames:
            for item in frame.module.items:
                if isinstance(item, T.ContAssign):
                    frame.write(item.lhs, frame.eval(item.rhs, env)[0], env, out)
                elif isinstance(item, T.Always) and item.clock is None:
                    frame.execute(item.body, env, out, blocking_env=False)
            for child, inst in frame.children:
                for port_name, value in inst.conns:
                    if value is None:
                        continue
                    if child.module.port(port_name).direction == "input":
                        out[child.names[port_name]] = frame.eval(value, env)[0] & mask(self.widths[child.names[port_name]])
                    else:
                        inner = child.names[port_name]
                        lv = _connection_lvalue(value)
                        frame.write(lv, env[inner], env, out)
        return out

    def step(self, inputs: Mapping[str, int]) -> dict[str, object]:
        env: dict[str, object] = {name: 0 for name in self.widths if name not in self.depths}
        for port in self.root.module.ports:
            if port.direction == "input":
                env[port.name] = inputs.get(port.name, 0) & mask(self.widths[port.name])
        env.update({k: (list(v) if isinstance(v, list) else v) for k, v in self.state.items()})
        for _ in range(self.MAX_SETTLE):
            out = self._comb_pass(env)
            if all(env.get(k) == v for k, v in out.items()):
                break
            env.update(out)
        else:
            raise RuntimeError("combinational logic did not settle")
        nxt = {k: (list(v) if isinstance(v, list) else v) for k, v in self.state.items()}
        for frame in self.frames:
            for item in frame.module.items:
                if isinstance(item, T.Always) and item.clock is not None:
                    frame.execute(item.body, dict(env), nxt, blocking_env=True)
        self.state = nxt
        return env


def _connection_lvalue(e: T.AstExpr) -> T.LValue:
    if isinstance(e, T.Id):
        return T.LValue(e.name)
    if isinstance(e, T.Index):
        return T.LValue(e.name, index=e.index)
    return T.LValue(e.name, msb=e.msb, lsb=e.lsb)
