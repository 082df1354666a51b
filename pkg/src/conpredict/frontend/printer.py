"""Pretty-printer for MiniCC; re-parsing the output reproduces the AST
structure (uids and line numbers may differ)."""

from __future__ import annotations

from .astnodes import (
    Assign,
    Binary,
    BoolLit,
    Call,
    Decl,
    DoWhile,
    FunctionDecl,
    GlobalDecl,
    If,
    IntLit,
    Return,
    Skip,
    SourceUnit,
    SpawnInit,
    Unary,
    Var,
    While,
)

# Binding strength used to parenthesize only where needed.
_PREC = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "&": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4, "==": 4, "!=": 4,
    "<<": 5, ">>": 5,
    "+": 6, "-": 6,
    "*": 7, "/": 7, "%": 7,
}


def format_expr(e, parent_prec: int = 0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        return f"{e.op}{format_expr(e.operand, 8)}"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        # Left-associative: the right child needs parens at equal precedence.
        s = (
            f"{format_expr(e.left, prec)} {e.op} "
            f"{format_expr(e.right, prec + 1)}"
        )
        return f"({s})" if prec < parent_prec else s
    raise TypeError(f"not an expression: {e!r}")


def _format_stmt(st, indent: int, out: list):
    pad = "    " * indent
    if isinstance(st, Decl):
        if st.init is None:
            out.append(f"{pad}{st.type} {st.name};")
        elif isinstance(st.init, SpawnInit):
            args = "".join(", " + format_expr(a) for a in st.init.args)
            out.append(f"{pad}{st.type} {st.name} = spawn({st.init.target}{args});")
        else:
            out.append(f"{pad}{st.type} {st.name} = {format_expr(st.init)};")
    elif isinstance(st, Assign):
        out.append(f"{pad}{st.name} {st.op} {format_expr(st.expr)};")
    elif isinstance(st, Call):
        args = ", ".join(format_expr(a) for a in st.args)
        out.append(f"{pad}{st.name}({args});")
    elif isinstance(st, If):
        out.append(f"{pad}if ({format_expr(st.cond)}) {{")
        for s in st.then_body:
            _format_stmt(s, indent + 1, out)
        if st.else_body:
            out.append(f"{pad}}} else {{")
            for s in st.else_body:
                _format_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(st, While):
        out.append(f"{pad}while ({format_expr(st.cond)}) {{")
        for s in st.body:
            _format_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(st, DoWhile):
        out.append(f"{pad}do {{")
        for s in st.body:
            _format_stmt(s, indent + 1, out)
        out.append(f"{pad}}} while ({format_expr(st.cond)});")
    elif isinstance(st, Return):
        out.append(f"{pad}return;")
    elif isinstance(st, Skip):
        out.append(f"{pad};")
    else:
        raise TypeError(f"not a statement: {st!r}")


def pretty_print(u: SourceUnit) -> str:
    out: list[str] = []
    for g in u.globals:
        if g.init is None:
            out.append(f"{g.type} {g.name};")
        else:
            out.append(f"{g.type} {g.name} = {format_expr(g.init)};")
    if u.globals and u.functions:
        out.append("")
    for i, f in enumerate(u.functions):
        if i > 0:
            out.append("")
        params = ", ".join(f"{ty} {name}" for name, ty in f.params)
        out.append(f"fn {f.name}({params}) {{")
        for st in f.body:
            _format_stmt(st, 1, out)
        out.append("}")
    return "\n".join(out) + "\n"
