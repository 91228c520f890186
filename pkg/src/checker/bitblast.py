"""Tseitin bit-blasting of expressions into a SAT session.

Words are lists of literals, least significant bit first. Gates fold
constants and are structurally hashed, so identical sub-circuits within a
session share variables.
"""

from typing import Mapping, Sequence, Union

from src.checker.sat import SatSession
from src.hdl.expr import (
    Binary,
    Concat,
    Const,
    Expr,
    MemRead,
    Ref,
    Slice,
    Ternary,
    Trunc,
    Unary,
)

Word = list[int]
Value = Union[Word, list[Word]]  # a memory is a list of words


class Circuit:
    def __init__(self, session: SatSession):
        self.s = session
        self.T = session.true
        self.F = -session.true
        self._and: dict[tuple[int, int], int] = {}
        self._xor: dict[tuple[int, int], int] = {}

    # --- gates ---

    def const(self, value: int, width: int) -> Word:
        return [self.T if (value >> i) & 1 else self.F for i in range(width)]

    def fresh(self, width: int, name: str = "") -> Word:
        return [self.s.new_var(f"{name}[{i}]" if name else None) for i in range(width)]

    def and2(self, a: int, b: int) -> int:
        if a == self.F or b == self.F or a == -b:
            return self.F
        if a == self.T:
            return b
        if b == self.T or a == b:
            return a
        key = (min(a, b), max(a, b))
        out = self._and.get(key)
        if out is None:
            out = self.s.new_var()
            self.s.add([-out, a])
            self.s.add([-out, b])
            self.s.add([out, -a, -b])
            self._and[key] = out
        return out

    def or2(self, a: int, b: int) -> int:
        return -self.and2(-a, -b)

    def xor2(self, a: int, b: int) -> int:
        if a == self.F:
            return b
        if b == self.F:
            return a
        if a == self.T:
            return -b
        if b == self.T:
            return -a
        if a == b:
            return self.F
        if a == -b:
            return self.T
        sign = 1
        if a < 0:
            a, sign = -a, -sign
        if b < 0:
            b, sign = -b, -sign
        key = (min(a, b), max(a, b))
        out = self._xor.get(key)
        if out is None:
            out = self.s.new_var()
            self.s.add([-out, a, b])
            self.s.add([-out, -a, -b])
            self.s.add([out, -a, b])
            self.s.add([out, a, -b])
            self._xor[key] = out
        return out * sign

    def mux(self, sel: int, a: int, b: int) -> int:
        """``sel ? a : b``"""
        if sel == self.T or a == b:
            return a
        if sel == self.F:
            return b
        return self.or2(self.and2(sel, a), self.and2(-sel, b))

    def and_all(self, lits: Sequence[int]) -> int:
        out = self.T
        for lit in lits:
            out = self.and2(out, lit)
        return out

    def or_all(self, lits: Sequence[int]) -> int:
        out = self.F
        for lit in lits:
            out = self.or2(out, lit)
        return out

    def xor_all(self, lits: Sequence[int]) -> int:
        out = self.F
        for lit in lits:
            out = self.xor2(out, lit)
        return out

    # --- words ---

    def extend(self, w: Word, width: int) -> Word:
        return (w + [self.F] * (width - len(w)))[:width]

    def add(self, a: Word, b: Word, carry: int = 0) -> Word:
        carry = carry or self.F
        out = []
        for x, y in zip(a, b):
            t = self.xor2(x, y)
            out.append(self.xor2(t, carry))
            carry = self.or2(self.and2(x, y), self.and2(t, carry))
        return out

    def sub(self, a: Word, b: Word) -> Word:
        return self.add(a, [-y for y in b], self.T)

    def eq(self, a: Word, b: Word) -> int:
        width = max(len(a), len(b))
        a, b = self.extend(a, width), self.extend(b, width)
        return self.and_all([-self.xor2(x, y) for x, y in zip(a, b)])

    def ult(self, a: Word, b: Word) -> int:
        width = max(len(a), len(b))
        a, b = self.extend(a, width), self.extend(b, width)
        lt = self.F
        for x, y in zip(a, b):
            # from the lsb up: a < b if the current bit decides it, else the lower bits do
            lt = self.or2(self.and2(-x, y), self.and2(-self.xor2(x, y), lt))
        return lt

    def ite(self, sel: int, a: Word, b: Word) -> Word:
        return [self.mux(sel, x, y) for x, y in zip(a, b)]

    def shift(self, a: Word, amount: Word, op: str) -> Word:
        width = len(a)
        out = list(a)
        stages = max(1, (width - 1).bit_length())
        for k, sel in enumerate(amount[:stages]):
            step = 1 << k
            if op == "<<":
                moved = [self.F] * min(step, width) + out[: max(width - step, 0)]
            else:
                moved = out[step:] + [self.F] * min(step, width)
            out = self.ite(sel, moved[:width], out)
        # amounts of at least the width shift everything out
        overflow = self.or_all(amount[stages:])
        if (1 << stages) > width:
            overflow = self.or2(overflow, self.ult(self.const(width - 1, stages), amount[:stages]))
        return self.ite(overflow, [self.F] * width, out)

    def word_index(self, addr: Word, i: int) -> int:
        if i >> len(addr):
            return self.F
        return self.eq(addr, self.const(i, len(addr)))

    def read(self, words: list[Word], addr: Word, width: int) -> Word:
        out = [self.F] * width
        for i, w in enumerate(words):
            hit = self.word_index(addr, i)
            if hit != self.F:
                out = [self.or2(o, self.and2(hit, x)) for o, x in zip(out, self.extend(w, width))]
        return out


class Blaster:
    """Bit-blasts expressions against one frame's signal values."""

    def __init__(self, circuit: Circuit, env: Mapping[str, Value]):
        self.c = circuit
        self.env = env
        self._memo: dict[int, tuple[Expr, Word]] = {}

    def truth(self, e: Expr) -> int:
        return self.c.or_all(self.blast(e))

    def blast(self, e: Expr) -> Word:
        # the node is kept alongside its bits so its id stays unique
        hit = self._memo.get(id(e))
        if hit is None:
            hit = (e, self._blast(e))
            self._memo[id(e)] = hit
        return hit[1]

    def _blast(self, e: Expr) -> Word:
        c = self.c
        if isinstance(e, Const):
            return c.const(e.value, e.width)
        if isinstance(e, Ref):
            bits = self.env[e.name]
            return c.extend(list(bits[e.lsb : e.msb + 1]), e.width)
        if isinstance(e, MemRead):
            return c.read(self.env[e.name], self.blast(e.addr), e.width)
        if isinstance(e, Unary):
            a = self.blast(e.a)
            if e.op == "~":
                return [-x for x in a]
            if e.op == "-":
                return c.sub(c.const(0, len(a)), a)
            if e.op == "!":
                return [-c.or_all(a)]
            if e.op == "&":
                return [c.and_all(a)]
            if e.op == "|":
                return [c.or_all(a)]
            if e.op == "^":
                return [c.xor_all(a)]
            raise ValueError(e.op)
        if isinstance(e, Binary):
            return self._binary(e)
        if isinstance(e, Ternary):
            sel = self.truth(e.cond)
            return c.ite(sel, c.extend(self.blast(e.a), e.width), c.extend(self.blast(e.b), e.width))
        if isinstance(e, Concat):
            out: Word = []
            for part in reversed(e.parts):
                out.extend(self.blast(part))
            return out
        if isinstance(e, Trunc):
            return c.extend(self.blast(e.a), e.width)
        if isinstance(e, Slice):
            a = c.extend(self.blast(e.a), e.msb + 1)
            return a[e.lsb : e.msb + 1]
        raise TypeError(f"unknown expression node {type(e).__name__}")

    def _binary(self, e: Binary) -> Word:
        c = self.c
        op = e.op
        if op in ("&&", "||"):
            a, b = self.truth(e.a), self.truth(e.b)
            return [c.and2(a, b) if op == "&&" else c.or2(a, b)]
        a, b = self.blast(e.a), self.blast(e.b)
        if op in ("<<", ">>", ">>>"):
            return c.shift(a, b, op)
        if op in ("==", "!="):
            out = c.eq(a, b)
            return [out if op == "==" else -out]
        if op in ("<", ">=", ">", "<="):
            lt = c.ult(a, b) if op in ("<", ">=") else c.ult(b, a)
            return [lt if op in ("<", ">") else -lt]
        width = e.width
        a, b = c.extend(a, width), c.extend(b, width)
        if op == "&":
            return [c.and2(x, y) for x, y in zip(a, b)]
        if op == "|":
            return [c.or2(x, y) for x, y in zip(a, b)]
        if op == "^":
            return [c.xor2(x, y) for x, y in zip(a, b)]
        if op == "+":
            return c.add(a, b)
        if op == "-":
            return c.sub(a, b)
        raise ValueError(op)
