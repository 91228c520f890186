"""Canonical re-emission of a ModuleTree in the supported subset."""

from src.hdl import tree as T

INDENT = "    "

_ATOMIC = (T.Num, T.Id, T.Index, T.PartSelect, T.Cat, T.Rep)
_DIGITS = {"b": "b", "o": "o", "h": "x"}


def num_text(n: T.Num) -> str:
    if n.width is None and n.base == "d":
        return str(n.value)
    digits = format(n.value, _DIGITS[n.base]) if n.base in _DIGITS else str(n.value)
    size = "" if n.width is None else str(n.width)
    return f"{size}'{n.base}{digits}"


def expr_text(e: T.AstExpr) -> str:
    if isinstance(e, T.Num):
        return num_text(e)
    if isinstance(e, T.Id):
        return e.name
    if isinstance(e, T.Index):
        return f"{e.name}[{expr_text(e.index)}]"
    if isinstance(e, T.PartSelect):
        return f"{e.name}[{expr_text(e.msb)}:{expr_text(e.lsb)}]"
    if isinstance(e, T.Cat):
        return "{" + ", ".join(expr_text(p) for p in e.parts) + "}"
    if isinstance(e, T.Rep):
        return "{" + expr_text(e.count) + "{" + ", ".join(expr_text(p) for p in e.parts) + "}}"
    if isinstance(e, T.Un):
        return f"{e.op}{_operand(e.a)}"
    if isinstance(e, T.Bin):
        return f"{_operand(e.a)} {e.op} {_operand(e.b)}"
    if isinstance(e, T.Cond):
        return f"{_operand(e.cond)} ? {_operand(e.a)} : {_operand(e.b)}"
    raise TypeError(f"not an expression: {type(e).__name__}")


def _operand(e: T.AstExpr) -> str:
    text = expr_text(e)
    return text if isinstance(e, _ATOMIC) else f"({text})"


def _range(r: T.Range | None) -> str:
    return "" if r is None else f"[{expr_text(r.msb)}:{expr_text(r.lsb)}] "


def lvalue_text(lv: T.LValue) -> str:
    if lv.index is not None:
        return f"{lv.name}[{expr_text(lv.index)}]"
    if lv.msb is not None:
        return f"{lv.name}[{expr_text(lv.msb)}:{expr_text(lv.lsb)}]"
    return lv.name


def _stmt_lines(s: T.Stmt, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(s, T.Assign):
        op = "<=" if s.nonblocking else "="
        return [f"{pad}{lvalue_text(s.lhs)} {op} {expr_text(s.rhs)};"]
    if isinstance(s, T.Block):
        lines = [f"{pad}begin"]
        for inner in s.stmts:
            lines.extend(_stmt_lines(inner, depth + 1))
        return lines + [f"{pad}end"]
    if isinstance(s, T.If):
        lines = [f"{pad}if ({expr_text(s.cond)})"] + _stmt_lines(s.then, depth + 1)
        if s.orelse is not None:
            lines += [f"{pad}else"] + _stmt_lines(s.orelse, depth + 1)
        return lines
    if isinstance(s, T.Case):
        lines = [f"{pad}case ({expr_text(s.subject)})"]
        for item in s.items:
            head = "default" if item.labels is None else ", ".join(expr_text(l) for l in item.labels)
            lines.append(f"{pad}{INDENT}{head}:")
            lines.extend(_stmt_lines(item.body, depth + 2))
        return lines + [f"{pad}endcase"]
    raise TypeError(f"not a statement: {type(s).__name__}")


def _item_lines(item: T.Item) -> list[str]:
    if isinstance(item, T.ParamDecl):
        kw = "localparam" if item.local else "parameter"
        return [f"{INDENT}{kw} {item.name} = {expr_text(item.value)};"]
    if isinstance(item, T.NetDecl):
        kind = "reg" if item.is_reg else "wire"
        array = "" if item.array is None else " " + _range(item.array).strip()
        return [f"{INDENT}{kind} {_range(item.range)}{item.name}{array};"]
    if isinstance(item, T.ContAssign):
        return [f"{INDENT}assign {lvalue_text(item.lhs)} = {expr_text(item.rhs)};"]
    if isinstance(item, T.Always):
        sens = "*" if item.clock is None else f"posedge {item.clock}"
        return [f"{INDENT}always @({sens})"] + _stmt_lines(item.body, 2)
    if isinstance(item, T.Instance):
        params = ""
        if item.params:
            params = " #(" + ", ".join(f".{n}({expr_text(v)})" for n, v in item.params) + ")"
        conns = ", ".join(f".{n}({'' if v is None else expr_text(v)})" for n, v in item.conns)
        return [f"{INDENT}{item.module}{params} {item.name} ({conns});"]
    raise TypeError(f"not a module item: {type(item).__name__}")


def _port_text(p: T.PortDecl) -> str:
    attr = "(* unused *) " if p.unused else ""
    kind = " reg" if p.is_reg else ""
    return f"{INDENT}{attr}{p.direction}{kind} {_range(p.range)}{p.name}"


def pretty_print(tree: T.ModuleTree) -> str:
    """Emit source text that reparses to a structurally identical tree."""
    out: list[str] = []
    for module in tree.modules:
        header = f"module {module.name}"
        if module.params:
            header += " #(" + ", ".join(f"parameter {p.name} = {expr_text(p.value)}" for p in module.params) + ")"
        if module.ports:
            out.append(header + " (")
            out.append(",\n".join(_port_text(p) for p in module.ports))
            out.append(");")
        else:
            out.append(header + ";")
        for item in module.items:
            out.extend(_item_lines(item))
        out.append("endmodule")
        out.append("")
    return "\n".join(out)
