"""Hierarchy-preserving syntax tree produced by the RTL parser.

Every node carries its source location; locations are excluded from equality
so a pretty-printed and reparsed tree compares equal to the original.
"""

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Loc:
    line: int = 0
    column: int = 0


NOWHERE = Loc()


def _loc():
    return field(default=NOWHERE, compare=False, repr=False)


# --- expressions ---


@dataclass(frozen=True)
class Num:
    value: int
    width: Optional[int] = None  # None for unsized decimals
    base: str = "d"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Id:
    name: str
    loc: Loc = _loc()


@dataclass(frozen=True)
class Index:
    name: str
    index: "AstExpr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class PartSelect:
    name: str
    msb: "AstExpr"
    lsb: "AstExpr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Un:
    op: str
    a: "AstExpr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Bin:
    op: str
    a: "AstExpr"
    b: "AstExpr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Cond:
    cond: "AstExpr"
    a: "AstExpr"
    b: "AstExpr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Cat:
    parts: tuple["AstExpr", ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class Rep:
    count: "AstExpr"
    parts: tuple["AstExpr", ...]
    loc: Loc = _loc()


AstExpr = Union[Num, Id, Index, PartSelect, Un, Bin, Cond, Cat, Rep]


# --- statements ---


@dataclass(frozen=True)
class LValue:
    name: str
    index: Optional[AstExpr] = None
    msb: Optional[AstExpr] = None
    lsb: Optional[AstExpr] = None
    loc: Loc = _loc()


@dataclass(frozen=True)
class Assign:
    lhs: LValue
    rhs: AstExpr
    nonblocking: bool
    loc: Loc = _loc()


@dataclass(frozen=True)
class Block:
    stmts: tuple["Stmt", ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class If:
    cond: AstExpr
    then: "Stmt"
    orelse: Optional["Stmt"] = None
    loc: Loc = _loc()


@dataclass(frozen=True)
class CaseItem:
    labels: Optional[tuple[AstExpr, ...]]  # None for default
    body: "Stmt"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Case:
    subject: AstExpr
    items: tuple[CaseItem, ...]
    loc: Loc = _loc()


Stmt = Union[Assign, Block, If, Case]


# --- module items ---


@dataclass(frozen=True)
class Range:
    msb: AstExpr
    lsb: AstExpr


@dataclass(frozen=True)
class PortDecl:
    direction: str  # input | output
    is_reg: bool
    range: Optional[Range]
    name: str
    unused: bool = False
    loc: Loc = _loc()


@dataclass(frozen=True)
class ParamDecl:
    name: str
    value: AstExpr
    local: bool = False
    loc: Loc = _loc()


@dataclass(frozen=True)
class NetDecl:
    name: str
    range: Optional[Range]
    is_reg: bool
    array: Optional[Range] = None
    loc: Loc = _loc()


@dataclass(frozen=True)
class ContAssign:
    lhs: LValue
    rhs: AstExpr
    loc: Loc = _loc()


@dataclass(frozen=True)
class Always:
    clock: Optional[str]  # None for combinational always @(*)
    body: Stmt
    loc: Loc = _loc()


@dataclass(frozen=True)
class Instance:
    module: str
    name: str
    params: tuple[tuple[str, AstExpr], ...]
    conns: tuple[tuple[str, Optional[AstExpr]], ...]
    loc: Loc = _loc()


Item = Union[ParamDecl, NetDecl, ContAssign, Always, Instance]


@dataclass(frozen=True)
class ModuleDef:
    name: str
    params: tuple[ParamDecl, ...]
    ports: tuple[PortDecl, ...]
    items: tuple[Item, ...]
    loc: Loc = _loc()

    def port(self, name: str) -> Optional[PortDecl]:
        return next((p for p in self.ports if p.name == name), None)


@dataclass(frozen=True)
class ModuleTree:
    modules: tuple[ModuleDef, ...]
    file: str = field(default="<input>", compare=False)

    def module(self, name: str) -> Optional[ModuleDef]:
        return next((m for m in self.modules if m.name == name), None)

    def assignment_count(self) -> int:
        count = 0
        for m in self.modules:
            for item in m.items:
                if isinstance(item, ContAssign):
                    count += 1
                elif isinstance(item, Always):
                    count += _count_assigns(item.body)
        return count


def _count_assigns(stmt: Stmt) -> int:
    if isinstance(stmt, Assign):
        return 1
    if isinstance(stmt, Block):
        return sum(_count_assigns(s) for s in stmt.stmts)
    if isinstance(stmt, If):
        return _count_assigns(stmt.then) + (_count_assigns(stmt.orelse) if stmt.orelse else 0)
    if isinstance(stmt, Case):
        return sum(_count_assigns(i.body) for i in stmt.items)
    return 0
