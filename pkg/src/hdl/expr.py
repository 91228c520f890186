"""Word-level expression IR shared by the netlist, the properties and the checker.

Expressions reference signals by name. Widths follow self-determined rules:
bitwise and arithmetic operators take the wider operand, shifts keep the left
operand's width, comparisons and logical operators are one bit wide.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, Sequence, Union

BITWISE_OPS = {"&", "|", "^"}
ARITH_OPS = {"+", "-"}
SHIFT_OPS = {"<<", ">>", ">>>"}
COMPARE_OPS = {"==", "!=", "<", "<=", ">", ">="}
LOGIC_OPS = {"&&", "||"}
UNARY_OPS = {"~", "!", "-", "&", "|", "^"}


def mask(width: int) -> int:
    return (1 << width) - 1


class Expr:
    """Base class for IR expressions."""

    width: int

    def children(self) -> tuple["Expr", ...]:
        return ()

    def walk(self) -> Iterator["Expr"]:
        yield self
        for child in self.children():
            yield from child.walk()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(Expr):
    value: int
    width: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value & mask(self.width))


@dataclass(frozen=True)
class Ref(Expr):
    """Bit range of a declared signal; ``size`` is the declared width."""

    name: str
    msb: int
    lsb: int
    size: int

    @property
    def width(self) -> int:
        return self.msb - self.lsb + 1

    @property
    def full(self) -> bool:
        return self.lsb == 0 and self.msb == self.size - 1


def ref(name: str, size: int) -> Ref:
    return Ref(name, size - 1, 0, size)


@dataclass(frozen=True)
class MemRead(Expr):
    name: str
    addr: Expr
    width: int

    def children(self):
        return (self.addr,)


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    a: Expr

    @cached_property
    def width(self) -> int:
        return self.a.width if self.op in ("~", "-") else 1

    def children(self):
        return (self.a,)


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    a: Expr
    b: Expr

    @cached_property
    def width(self) -> int:
        if self.op in COMPARE_OPS or self.op in LOGIC_OPS:
            return 1
        if self.op in SHIFT_OPS:
            return self.a.width
        return max(self.a.width, self.b.width)

    def children(self):
        return (self.a, self.b)


@dataclass(frozen=True)
class Ternary(Expr):
    cond: Expr
    a: Expr
    b: Expr

    @cached_property
    def width(self) -> int:
        return max(self.a.width, self.b.width)

    def children(self):
        return (self.cond, self.a, self.b)


@dataclass(frozen=True)
class Concat(Expr):
    parts: tuple[Expr, ...]

    @cached_property
    def width(self) -> int:
        return sum(p.width for p in self.parts)

    def children(self):
        return self.parts


TRUE = Const(1, 1)
FALSE = Const(0, 1)


# --- Boolean helpers ---


def is_true(e: Expr) -> bool:
    return isinstance(e, Const) and e.width == 1 and e.value == 1


def is_false(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def is_boolean(e: Expr) -> bool:
    """True when the expression is already a truth value (comparison or logic)."""
    if isinstance(e, Binary):
        return e.op in COMPARE_OPS or e.op in LOGIC_OPS
    if isinstance(e, Unary):
        return e.op == "!"
    return isinstance(e, Const) and e.width == 1


def truth(e: Expr) -> Expr:
    """Normalise a condition: 1-bit references compare against 1'b1, vectors against zero."""
    if isinstance(e, Unary) and e.op == "!":
        return not_(truth(e.a))
    if is_boolean(e):
        return e
    if isinstance(e, Const):
        return TRUE if e.value else FALSE
    if e.width == 1:
        return Binary("==", e, Const(1, 1))
    return Binary("!=", e, Const(0, e.width))


_NEGATED = {"<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def not_(e: Expr) -> Expr:
    if isinstance(e, Const):
        return FALSE if e.value else TRUE
    if isinstance(e, Binary):
        if e.op == "==" and isinstance(e.b, Const) and e.b.width == 1 and e.a.width == 1:
            return Binary("==", e.a, Const(1 - e.b.value, 1))
        if e.op == "==":
            return Binary("!=", e.a, e.b)
        if e.op == "!=":
            return Binary("==", e.a, e.b)
        if e.op in _NEGATED:
            return Binary(_NEGATED[e.op], e.a, e.b)
    if isinstance(e, Unary) and e.op == "!":
        return e.a
    return Unary("!", truth(e))


def _flatten(op: str, items: Sequence[Expr]) -> list[Expr]:
    out: list[Expr] = []
    for item in items:
        if isinstance(item, Binary) and item.op == op:
            out.extend(_flatten(op, [item.a, item.b]))
        else:
            out.append(item)
    return out


def and_(*items: Expr) -> Expr:
    terms: list[Expr] = []
    for item in _flatten("&&", [truth(i) for i in items]):
        if is_false(item):
            return FALSE
        if is_true(item) or item in terms:
            continue
        terms.append(item)
    return _chain("&&", terms, TRUE)


def or_(*items: Expr) -> Expr:
    terms: list[Expr] = []
    for item in _flatten("||", [truth(i) for i in items]):
        if is_true(item):
            return TRUE
        if is_false(item) or item in terms:
            continue
        terms.append(item)
    return _chain("||", terms, FALSE)


def _chain(op: str, terms: list[Expr], empty: Expr) -> Expr:
    if not terms:
        return empty
    result = terms[0]
    for term in terms[1:]:
        result = Binary(op, result, term)
    return result


def eq(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return TRUE if a.value == b.value else FALSE
    return Binary("==", a, b)


def one_of(e: Expr, values: Sequence[int]) -> Expr:
    return or_(*[eq(e, Const(v, e.width)) for v in values])


def fit(e: Expr, width: int) -> Expr:
    """Zero-extend or truncate to the given width."""
    if e.width == width:
        return e
    if isinstance(e, Const):
        return Const(e.value, width)
    if e.width > width:
        if isinstance(e, Ref):
            return Ref(e.name, e.lsb + width - 1, e.lsb, e.size)
        return _Trunc(e, width)
    return Concat((Const(0, width - e.width), e))


@dataclass(frozen=True)
class _Trunc(Expr):
    """Low-bit truncation of a computed expression."""

    a: Expr
    width: int

    def children(self):
        return (self.a,)


Trunc = _Trunc


# --- Queries ---


def signal_names(e: Expr) -> set[str]:
    """All signal and memory names referenced by the expression."""
    names: set[str] = set()
    for node in e.walk():
        if isinstance(node, Ref):
            names.add(node.name)
        elif isinstance(node, MemRead):
            names.add(node.name)
    return names


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace full-width references by expressions."""
    if isinstance(e, Ref):
        repl = mapping.get(e.name)
        if repl is None:
            return e
        if e.full and e.width == repl.width:
            return repl
        return _Slice(repl, e.msb, e.lsb)
    if isinstance(e, Const):
        return e
    if isinstance(e, MemRead):
        return MemRead(e.name, substitute(e.addr, mapping), e.width)
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.a, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.a, mapping), substitute(e.b, mapping))
    if isinstance(e, Ternary):
        return Ternary(substitute(e.cond, mapping), substitute(e.a, mapping), substitute(e.b, mapping))
    if isinstance(e, Concat):
        return Concat(tuple(substitute(p, mapping) for p in e.parts))
    if isinstance(e, _Trunc):
        return _Trunc(substitute(e.a, mapping), e.width)
    if isinstance(e, _Slice):
        return _Slice(substitute(e.a, mapping), e.msb, e.lsb)
    raise TypeError(f"unknown expression node {type(e).__name__}")


@dataclass(frozen=True)
class _Slice(Expr):
    a: Expr
    msb: int
    lsb: int

    @property
    def width(self) -> int:
        return self.msb - self.lsb + 1

    def children(self):
        return (self.a,)


Slice = _Slice


def rebuild(e: Expr, children: Sequence[Expr]) -> Expr:
    """Same node with new children."""
    if isinstance(e, (Const, Ref)):
        return e
    if isinstance(e, MemRead):
        return MemRead(e.name, children[0], e.width)
    if isinstance(e, Unary):
        return Unary(e.op, children[0])
    if isinstance(e, Binary):
        return Binary(e.op, children[0], children[1])
    if isinstance(e, Ternary):
        return Ternary(children[0], children[1], children[2])
    if isinstance(e, Concat):
        return Concat(tuple(children))
    if isinstance(e, _Trunc):
        return _Trunc(children[0], e.width)
    if isinstance(e, _Slice):
        return _Slice(children[0], e.msb, e.lsb)
    raise TypeError(f"unknown expression node {type(e).__name__}")


def fold(e: Expr) -> Expr:
    """Constant-fold; logic operators and muxes short-circuit on constant operands."""
    if isinstance(e, (Const, Ref)):
        return e
    if isinstance(e, Binary) and e.op in LOGIC_OPS:
        a, b = fold(e.a), fold(e.b)
        return and_(a, b) if e.op == "&&" else or_(a, b)
    if isinstance(e, Ternary):
        cond = fold(e.cond)
        if isinstance(cond, Const):
            return fit(fold(e.a if cond.value else e.b), e.width)
        return Ternary(cond, fold(e.a), fold(e.b))
    node = rebuild(e, [fold(c) for c in e.children()])
    if not isinstance(node, MemRead) and all(isinstance(c, Const) for c in node.children()):
        return Const(evaluate(node, {}), node.width)
    return node


# --- Evaluation ---

Env = Mapping[str, Union[int, Sequence[int]]]


def evaluate(e: Expr, env: Env) -> int:
    """Two-valued evaluation; memories map to word lists, out-of-range reads give zero."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Ref):
        return (env[e.name] >> e.lsb) & mask(e.width)
    if isinstance(e, MemRead):
        words = env[e.name]
        addr = evaluate(e.addr, env)
        return words[addr] & mask(e.width) if addr < len(words) else 0
    if isinstance(e, Unary):
        a = evaluate(e.a, env)
        w = e.a.width
        if e.op == "~":
            return ~a & mask(w)
        if e.op == "-":
            return -a & mask(w)
        if e.op == "!":
            return int(a == 0)
        if e.op == "&":
            return int(a == mask(w))
        if e.op == "|":
            return int(a != 0)
        if e.op == "^":
            return bin(a).count("1") & 1
        raise ValueError(e.op)
    if isinstance(e, Binary):
        if e.op == "&&":
            return int(evaluate(e.a, env) != 0 and evaluate(e.b, env) != 0)
        if e.op == "||":
            return int(evaluate(e.a, env) != 0 or evaluate(e.b, env) != 0)
        a = evaluate(e.a, env)
        b = evaluate(e.b, env)
        return apply_binary(e.op, a, b, e.width)
    if isinstance(e, Ternary):
        return evaluate(e.a if evaluate(e.cond, env) else e.b, env) & mask(e.width)
    if isinstance(e, Concat):
        value = 0
        for part in e.parts:
            value = (value << part.width) | evaluate(part, env)
        return value
    if isinstance(e, _Trunc):
        return evaluate(e.a, env) & mask(e.width)
    if isinstance(e, _Slice):
        return (evaluate(e.a, env) >> e.lsb) & mask(e.width)
    raise TypeError(f"unknown expression node {type(e).__name__}")


def apply_binary(op: str, a: int, b: int, width: int) -> int:
    m = mask(width)
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    if op == "^":
        return a ^ b
    if op == "+":
        return (a + b) & m
    if op == "-":
        return (a - b) & m
    if op == "<<":
        return (a << b) & m if b < width else 0
    if op in (">>", ">>>"):
        # operands are unsigned, so >>> fills with zeros too
        return a >> b if b < width else 0
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    raise ValueError(op)


# --- Printing ---


def const_text(c: Const) -> str:
    if c.width == 1:
        return f"1'b{c.value}"
    return f"{c.width}'h{c.value:x}"


def to_text(e: Expr) -> str:
    """Verilog-style rendering; compound operands are parenthesised."""
    if isinstance(e, Const):
        return const_text(e)
    if isinstance(e, Ref):
        return e.name if e.full else _select_text(e)
    if isinstance(e, MemRead):
        return f"{e.name}[{to_text(e.addr)}]"
    if isinstance(e, Unary):
        return f"{e.op}{_operand(e.a)}"
    if isinstance(e, Binary):
        return f"{_operand(e.a)} {e.op} {_operand(e.b)}"
    if isinstance(e, Ternary):
        return f"{_operand(e.cond)} ? {_operand(e.a)} : {_operand(e.b)}"
    if isinstance(e, Concat):
        return "{" + ", ".join(to_text(p) for p in e.parts) + "}"
    if isinstance(e, _Trunc):
        return f"{_selected(e.a)}[{e.width - 1}:0]"
    if isinstance(e, _Slice):
        return f"{_selected(e.a)}[{e.msb}:{e.lsb}]"
    raise TypeError(f"unknown expression node {type(e).__name__}")


def _select_text(e: Ref) -> str:
    if e.msb == e.lsb:
        return f"{e.name}[{e.msb}]"
    return f"{e.name}[{e.msb}:{e.lsb}]"


def _selected(e: Expr) -> str:
    text = to_text(e)
    return text if isinstance(e, Concat) else f"({text})"


def _operand(e: Expr) -> str:
    text = to_text(e)
    if isinstance(e, (Binary, Ternary)):
        return f"({text})"
    return text
