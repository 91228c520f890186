"""RTL subset parser: source text -> ModuleTree."""

import logging
import re
from pathlib import Path

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from src.diagnostics import HdlSyntaxError, UnsupportedConstruct
from src.hdl import tree as T

logger = logging.getLogger(__name__)

GRAMMAR_FILE = Path(__file__).with_name("verilog.lark")

# Keywords outside the supported subset; reported by name instead of as syntax errors.
UNSUPPORTED_KEYWORDS = (
    "initial", "generate", "genvar", "function", "task", "negedge", "integer", "real",
    "inout", "casex", "casez", "for", "while", "forever", "repeat", "fork", "join",
    "force", "release", "signed", "specify", "primitive", "tri",
    "supply0", "supply1", "wait", "disable", "event", "time",
)
_KEYWORD_RE = re.compile(r"\b(" + "|".join(UNSUPPORTED_KEYWORDS) + r")\b")
_SYSTEM_RE = re.compile(r"\$[a-zA-Z_]\w*")
_DELAY_RE = re.compile(r"#\s*[0-9]")
_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.S)
_UNSUPPORTED_OPERATORS = {"*": "operator '*'", "/": "operator '/'", "%": "operator '%'", "`": "compiler directive"}

_parser: Lark | None = None


def get_parser() -> Lark:
    global _parser
    if _parser is None:
        _parser = Lark(
            GRAMMAR_FILE.read_text(),
            parser="lalr",
            lexer="contextual",
            propagate_positions=True,
            maybe_placeholders=False,
        )
    return _parser


def _position(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column


def _scan_unsupported(text: str, file: str) -> None:
    # Blank comments but keep offsets so positions stay exact.
    blanked = _COMMENT_RE.sub(lambda m: re.sub(r"[^\n]", " ", m.group(0)), text)
    for regex, describe in (
        (_KEYWORD_RE, lambda m: f"'{m.group(1)}'"),
        (_SYSTEM_RE, lambda m: f"system task '{m.group(0)}'"),
        (_DELAY_RE, lambda m: "delay control"),
    ):
        match = regex.search(blanked)
        if match:
            line, column = _position(blanked, match.start())
            raise UnsupportedConstruct(describe(match), line, column, file)


def _parse_number(token: Token, file: str) -> T.Num:
    text = token.value.replace("_", "")
    loc = T.Loc(token.line, token.column)
    if "'" not in text:
        return T.Num(int(text), None, "d", loc)
    size, rest = text.split("'", 1)
    if rest[0] in "sS":
        raise UnsupportedConstruct("signed literal", token.line, token.column, file)
    base = rest[0].lower()
    digits = rest[1:].strip()
    if re.search(r"[xXzZ?]", digits):
        raise UnsupportedConstruct("x/z literal", token.line, token.column, file)
    radix = {"b": 2, "o": 8, "d": 10, "h": 16}[base]
    value = int(digits, radix)
    width = int(size) if size else None
    if width is not None:
        value &= (1 << width) - 1
    return T.Num(value, width, base, loc)


def _loc(meta) -> T.Loc:
    if getattr(meta, "empty", True):
        return T.NOWHERE
    return T.Loc(meta.line, meta.column)


@v_args(meta=True)
class _TreeBuilder(Transformer):
    def __init__(self, file: str):
        super().__init__()
        self.file = file

    # --- expressions ---

    def num(self, meta, children):
        return _parse_number(children[0], self.file)

    def ident(self, meta, children):
        return T.Id(str(children[0]), _loc(meta))

    def index(self, meta, children):
        return T.Index(str(children[0]), children[1], _loc(meta))

    def partsel(self, meta, children):
        return T.PartSelect(str(children[0]), children[1], children[2], _loc(meta))

    def cat(self, meta, children):
        return T.Cat(tuple(children), _loc(meta))

    def rep(self, meta, children):
        return T.Rep(children[0], tuple(children[1:]), _loc(meta))

    def un(self, meta, children):
        return T.Un(str(children[0]), children[1], _loc(meta))

    def bin(self, meta, children):
        a, op, b = children
        return T.Bin(str(op), a, b, _loc(meta))

    def cond(self, meta, children):
        return T.Cond(children[0], children[1], children[2], _loc(meta))

    # --- statements ---

    def lv_name(self, meta, children):
        return T.LValue(str(children[0]), loc=_loc(meta))

    def lv_index(self, meta, children):
        return T.LValue(str(children[0]), index=children[1], loc=_loc(meta))

    def lv_part(self, meta, children):
        return T.LValue(str(children[0]), msb=children[1], lsb=children[2], loc=_loc(meta))

    def nb_assign(self, meta, children):
        return T.Assign(children[0], children[1], True, _loc(meta))

    def b_assign(self, meta, children):
        return T.Assign(children[0], children[1], False, _loc(meta))

    def block(self, meta, children):
        return T.Block(tuple(children), _loc(meta))

    def if_stmt(self, meta, children):
        orelse = children[2] if len(children) > 2 else None
        return T.If(children[0], children[1], orelse, _loc(meta))

    def case_arm(self, meta, children):
        return T.CaseItem(tuple(children[:-1]), children[-1], _loc(meta))

    def case_default(self, meta, children):
        return T.CaseItem(None, children[-1], _loc(meta))

    def case_stmt(self, meta, children):
        return T.Case(children[0], tuple(children[1:]), _loc(meta))

    # --- declarations ---

    def range(self, meta, children):
        return T.Range(children[0], children[1])

    def kind_wire(self, meta, children):
        return "wire"

    def kind_reg(self, meta, children):
        return "reg"

    def _port(self, meta, children, direction):
        unused = False
        if children and isinstance(children[0], Token) and children[0].type == "ATTR":
            unused = True
            children = children[1:]
        is_reg = False
        rng = None
        for child in children[:-1]:
            if child == "reg":
                is_reg = True
            elif isinstance(child, T.Range):
                rng = child
        return T.PortDecl(direction, is_reg, rng, str(children[-1]), unused, _loc(meta))

    def port_in(self, meta, children):
        return self._port(meta, children, "input")

    def port_out(self, meta, children):
        return self._port(meta, children, "output")

    def port_cont(self, meta, children):
        return ("continue", str(children[0]), _loc(meta))

    def port_list(self, meta, children):
        ports: list[T.PortDecl] = []
        for entry in children:
            if isinstance(entry, tuple):
                if not ports:
                    raise UnsupportedConstruct("non-ANSI port list", entry[2].line, entry[2].column, self.file)
                prev = ports[-1]
                ports.append(T.PortDecl(prev.direction, prev.is_reg, prev.range, entry[1], prev.unused, entry[2]))
            else:
                ports.append(entry)
        return tuple(ports)

    def port_header(self, meta, children):
        return ("ports", children[0] if children else ())

    def param_header_item(self, meta, children):
        return T.ParamDecl(str(children[0]), children[1], False, _loc(meta))

    def param_header(self, meta, children):
        return ("params", tuple(children))

    def param_assign(self, meta, children):
        return (str(children[0]), children[1], _loc(meta))

    def param_item(self, meta, children):
        return [T.ParamDecl(n, v, False, loc) for n, v, loc in children]

    def localparam_item(self, meta, children):
        return [T.ParamDecl(n, v, True, loc) for n, v, loc in children]

    def net_name(self, meta, children):
        return (str(children[0]), children[1] if len(children) > 1 else None, _loc(meta))

    def net_decl(self, meta, children):
        kind = children[0]
        rng = children[1] if len(children) > 1 and isinstance(children[1], T.Range) else None
        names = [c for c in children[1:] if isinstance(c, tuple)]
        if kind == "wire" and any(arr is not None for _, arr, _ in names):
            name, _, loc = next(n for n in names if n[1] is not None)
            raise UnsupportedConstruct("wire array", loc.line, loc.column, self.file)
        return [T.NetDecl(n, rng, kind == "reg", arr, loc) for n, arr, loc in names]

    def assign_item(self, meta, children):
        return T.ContAssign(children[0], children[1], _loc(meta))

    def sens_star(self, meta, children):
        return None

    def sens_posedge(self, meta, children):
        return str(children[0])

    def always_item(self, meta, children):
        return T.Always(children[0], children[1], _loc(meta))

    def conn(self, meta, children):
        return (str(children[0]), children[1] if len(children) > 1 else None)

    def conn_list(self, meta, children):
        return tuple(children)

    def param_override(self, meta, children):
        return ("override", children[0])

    def instance(self, meta, children):
        module = str(children[0])
        rest = children[1:]
        params: tuple = ()
        if rest and isinstance(rest[0], tuple) and rest[0] and rest[0][0] == "override":
            params = rest[0][1]
            rest = rest[1:]
        name = str(rest[0])
        conns = rest[1] if len(rest) > 1 else ()
        return T.Instance(module, name, params, conns, _loc(meta))

    def module_def(self, meta, children):
        name = str(children[0])
        params: tuple = ()
        ports: tuple = ()
        items: list = []
        for child in children[1:]:
            if isinstance(child, tuple) and child and child[0] == "params":
                params = child[1]
            elif isinstance(child, tuple) and child and child[0] == "ports":
                ports = child[1]
            elif isinstance(child, list):
                items.extend(child)
            else:
                items.append(child)
        return T.ModuleDef(name, params, ports, tuple(items), _loc(meta))

    def start(self, meta, children):
        return T.ModuleTree(tuple(children), self.file)


def parse_rtl(text: str, file: str = "<input>") -> T.ModuleTree:
    """Parse RTL source in the supported subset into a ModuleTree."""
    _scan_unsupported(text, file)
    try:
        parse_tree = get_parser().parse(text)
    except UnexpectedCharacters as e:
        char = text[e.pos_in_stream] if e.pos_in_stream < len(text) else ""
        if char in _UNSUPPORTED_OPERATORS:
            raise UnsupportedConstruct(_UNSUPPORTED_OPERATORS[char], e.line, e.column, file) from None
        raise HdlSyntaxError(f"unexpected character {char!r}", e.line, e.column, sorted(e.allowed or []), file) from None
    except UnexpectedEOF as e:
        raise HdlSyntaxError("unexpected end of input", 0, 0, list(e.expected), file) from None
    except UnexpectedToken as e:
        if e.token.value in _UNSUPPORTED_OPERATORS:
            raise UnsupportedConstruct(_UNSUPPORTED_OPERATORS[e.token.value], e.line, e.column, file) from None
        raise HdlSyntaxError(f"unexpected token {e.token.value!r}", e.line, e.column, sorted(e.expected), file) from None
    except UnexpectedInput as e:
        raise HdlSyntaxError("syntax error", getattr(e, "line", 0), getattr(e, "column", 0), None, file) from None
    try:
        result = _TreeBuilder(file).transform(parse_tree)
    except VisitError as e:
        raise e.orig_exc from None
    logger.debug("Parsed %s: %d modules", file, len(result.modules))
    return result


def parse_file(path: str | Path) -> T.ModuleTree:
    path = Path(path)
    return parse_rtl(path.read_text(), str(path))
