"""PSL emission and parsing for cover and assume directives."""

import json
import logging
from pathlib import Path
from typing import Iterable, Mapping, Optional

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

from src.diagnostics import PslSyntaxError
from src.hdl.expr import (
    Binary,
    Concat as CatExpr,
    Const,
    MemRead,
    Ref,
    Slice,
    Ternary,
    Trunc,
    Unary,
    ref,
    to_text,
    truth,
)
from src.hdl.netlist import FlatNetlist
from src.properties.property import HeldAddress, Property, PropertyKind
from src.properties.sere import Atom, Concat, Fuse, RepInf, Seq

logger = logging.getLogger(__name__)

GRAMMAR_FILE = Path(__file__).with_name("psl.lark")

# name -> (word width, depth); depth 0 marks a plain signal
SignalTable = Mapping[str, tuple[int, int]]

_parser: Lark | None = None


def get_parser() -> Lark:
    global _parser
    if _parser is None:
        _parser = Lark(GRAMMAR_FILE.read_text(), parser="lalr", lexer="contextual", maybe_placeholders=False)
    return _parser


def signal_table(netlist: FlatNetlist, aux: Iterable[HeldAddress] = (), extra: Optional[Mapping[str, int]] = None) -> dict:
    table = {s.name: (s.width, s.depth if s.is_memory else 0) for s in netlist.signals}
    for h in aux:
        table[h.name] = (h.width, 0)
    for name, width in (extra or {}).items():
        table[name] = (width, 0)
    return table


# --- emission ---


def _braced(seq: Seq) -> str:
    return "{" + sere_text(seq) + "}"


def sere_text(seq: Seq) -> str:
    if isinstance(seq, Atom):
        return f"({to_text(seq.cond)})"
    if isinstance(seq, RepInf):
        inner = sere_text(seq.a) if isinstance(seq.a, Atom) else _braced(seq.a)
        return f"{inner}[*]"
    if isinstance(seq, Fuse):
        left = _braced(seq.a) if isinstance(seq.a, Concat) else sere_text(seq.a)
        right = _braced(seq.b) if isinstance(seq.b, (Fuse, Concat)) else sere_text(seq.b)
        return f"{left} : {right}"
    if isinstance(seq, Concat):
        right = _braced(seq.b) if isinstance(seq.b, Concat) else sere_text(seq.b)
        return f"{sere_text(seq.a)} ; {right}"
    raise TypeError(f"unknown sequence node {type(seq).__name__}")


def emit_psl(prop: Property) -> str:
    lines = []
    if prop.clock:
        lines.append(f"default clock = (posedge {prop.clock});")
    label = f"{prop.name}: " if prop.name else ""
    lines.append(f"{label}{prop.kind.value} {{ {sere_text(prop.body)} }};")
    return "\n".join(lines)


def write_properties(properties: Iterable[Property], out_dir: str | Path) -> Path:
    """One .psl file per property plus manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for prop in properties:
        file = out_dir / f"{prop.name or prop.origin}.psl"
        header = []
        if prop.origin:
            header.append(f"// origin {prop.origin}")
        if prop.source or prop.sink:
            header.append(f"// {prop.source} -> {prop.sink}")
        for h in prop.aux:
            header.append(f"// {h.name}: frozen word address of {h.memory} ({h.width} bits)")
        file.write_text("\n".join(header + [emit_psl(prop)]) + "\n")
        manifest.append(prop.manifest_entry(file.name))
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    logger.info("Wrote %d property file(s) to %s", len(manifest), out_dir)
    return path


# --- parsing ---


def _number(text: str) -> Const:
    if "'" not in text:
        return Const(int(text), 32)
    size, rest = text.split("'", 1)
    base = {"b": 2, "d": 10, "h": 16}[rest[0].lower()]
    return Const(int(rest[1:].replace("_", ""), base), int(size))


class _PslBuilder(Transformer):
    def __init__(self, table: SignalTable):
        super().__init__()
        self.table = table

    def _width(self, name: str) -> tuple[int, int]:
        return self.table.get(name, (1, 0))

    # SERE layer
    def start(self, items):
        clock = items[0] if len(items) == 2 else None
        prop: Property = items[-1]
        return Property(prop.kind, prop.body, prop.name, clock=clock)

    def clock_decl(self, items):
        return str(items[0])

    def directive(self, items):
        name = items[0] if len(items) == 3 else ""
        kind, body = items[-2], items[-1]
        return Property(kind, body, name)

    def label(self, items):
        return str(items[0])

    def cover(self, _):
        return PropertyKind.COVER

    def assume(self, _):
        return PropertyKind.ASSUME

    def concat(self, items):
        return Concat(items[0], items[1])

    def fuse(self, items):
        return Fuse(items[0], items[1])

    def repinf(self, items):
        return RepInf(items[0])

    def atom(self, items):
        return Atom(items[0])

    def bare_atom(self, items):
        width, _ = self._width(str(items[0]))
        return Atom(truth(ref(str(items[0]), width)))

    # Boolean layer
    def num(self, items):
        return _number(str(items[0]))

    def name(self, items):
        name = str(items[0])
        width, depth = self._width(name)
        if depth:
            raise ValueError(f"memory '{name}' used without an index")
        return ref(name, width)

    def index(self, items):
        name, idx = str(items[0]), items[1]
        width, depth = self._width(name)
        if depth:
            return MemRead(name, idx, width)
        if isinstance(idx, Const):
            return Ref(name, idx.value, idx.value, max(width, idx.value + 1))
        return Trunc(Binary(">>", ref(name, width), idx), 1)

    def part(self, items):
        name, msb, lsb = str(items[0]), int(items[1]), int(items[2])
        width, _ = self._width(name)
        return Ref(name, msb, lsb, max(width, msb + 1))

    @v_args(inline=True)
    def select(self, e, msb, lsb):
        msb, lsb = int(msb), int(lsb)
        return Trunc(e, msb + 1) if lsb == 0 else Slice(e, msb, lsb)

    def cat(self, items):
        return CatExpr(tuple(items))

    @v_args(inline=True)
    def un(self, op, a):
        return Unary(str(op), a)

    @v_args(inline=True)
    def bin(self, a, op, b):
        return Binary(str(op), a, b)

    @v_args(inline=True)
    def tern(self, c, a, b):
        return Ternary(c, a, b)


def parse_psl(text: str, table: Optional[SignalTable] = None, file: str = "<input>") -> Property:
    """Inverse of ``emit_psl``; ``table`` supplies widths and marks memories."""
    try:
        tree = get_parser().parse(text)
        return _PslBuilder(table or {}).transform(tree)
    except UnexpectedEOF as exc:
        raise PslSyntaxError("unexpected end of input", file=file) from exc
    except UnexpectedInput as exc:
        expected = sorted(getattr(exc, "expected", None) or getattr(exc, "allowed", None) or [])
        hint = f" (expected one of: {', '.join(expected)})" if expected else ""
        raise PslSyntaxError(f"unexpected input{hint}", exc.line, exc.column, file) from exc
    except VisitError as exc:
        raise PslSyntaxError(str(exc.orig_exc), file=file) from exc
