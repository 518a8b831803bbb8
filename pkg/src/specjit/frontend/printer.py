"""AST pretty-printer producing parseable SL text."""

from __future__ import annotations

from specjit.frontend import ast as A

_PREC = {
    "or": 1, "and": 2, "not": 3,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "%": 6, "neg": 7, "**": 8,
}
_POSTFIX = 9


def _literal(value) -> str:
    if value is None:
        return "nil"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    if isinstance(value, float):
        text = repr(value)
        if text in ("inf", "nan", "-inf"):
            raise ValueError(f"float literal {text} has no source form")
        return text
    return str(value)


def _prec(node) -> int:
    if isinstance(node, A.BinOp):
        return _PREC[node.op]
    if isinstance(node, A.UnOp):
        return _PREC["not"] if node.op == "not" else _PREC["neg"]
    if isinstance(node, A.Literal) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool) and node.value < 0:
        return _PREC["neg"]
    return _POSTFIX


def expr_text(node) -> str:
    if isinstance(node, A.Literal):
        return _literal(node.value)
    if isinstance(node, A.Name):
        return node.name
    if isinstance(node, A.BinOp):
        p = _PREC[node.op]
        if node.op == "**":
            # right-assoc; left side must bind tighter
            left = _wrap(node.left, p + 1)
            right = _wrap(node.right, _PREC["neg"])
        else:
            left = _wrap(node.left, p)
            right = _wrap(node.right, p + 1)
        return f"{left} {node.op} {right}"
    if isinstance(node, A.UnOp):
        if node.op == "not":
            return f"not {_wrap(node.operand, _PREC['not'])}"
        return f"-{_wrap(node.operand, _PREC['neg'])}"
    if isinstance(node, A.Call):
        args = ", ".join(expr_text(a) for a in node.args)
        return f"{_wrap(node.func, _POSTFIX)}({args})"
    if isinstance(node, A.AttrGet):
        return f"{_wrap(node.obj, _POSTFIX)}.{node.name}"
    if isinstance(node, A.SubscrGet):
        return f"{_wrap(node.obj, _POSTFIX)}[{expr_text(node.index)}]"
    if isinstance(node, A.ListLit):
        return "[" + ", ".join(expr_text(i) for i in node.items) + "]"
    if isinstance(node, A.RecordLit):
        inner = ", ".join(f"{f.name}: {expr_text(f.value)}" for f in node.fields)
        return "record { " + inner + " }" if inner else "record { }"
    raise TypeError(f"not an expression: {node!r}")


def _wrap(node, min_prec) -> str:
    text = expr_text(node)
    return f"({text})" if _prec(node) < min_prec else text


def _block(stmts, indent) -> list[str]:
    lines = []
    for s in stmts:
        lines.extend(_stmt(s, indent))
    return lines


def _stmt(node, indent) -> list[str]:
    pad = "    " * indent
    if isinstance(node, A.FnDef):
        params = ", ".join(p.name for p in node.params)
        return [f"{pad}fn {node.name}({params}) {{", *_block(node.body, indent + 1), f"{pad}}}"]
    if isinstance(node, A.Let):
        return [f"{pad}let {node.name} = {expr_text(node.value)}"]
    if isinstance(node, A.Assign):
        return [f"{pad}{node.name} = {expr_text(node.value)}"]
    if isinstance(node, A.AttrAssign):
        return [f"{pad}{_wrap(node.obj, _POSTFIX)}.{node.name} = {expr_text(node.value)}"]
    if isinstance(node, A.SubscrAssign):
        return [f"{pad}{_wrap(node.obj, _POSTFIX)}[{expr_text(node.index)}] = {expr_text(node.value)}"]
    if isinstance(node, A.GlobalDecl):
        return [f"{pad}global {node.name}"]
    if isinstance(node, A.If):
        lines = [f"{pad}if {expr_text(node.cond)} {{", *_block(node.then, indent + 1)]
        if node.orelse is not None:
            lines.append(f"{pad}}} else {{")
            lines.extend(_block(node.orelse, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(node, A.While):
        return [f"{pad}while {expr_text(node.cond)} {{", *_block(node.body, indent + 1), f"{pad}}}"]
    if isinstance(node, A.ForIn):
        return [f"{pad}for {node.var} in {expr_text(node.iter)} {{",
                *_block(node.body, indent + 1), f"{pad}}}"]
    if isinstance(node, A.Return):
        return [f"{pad}return" if node.value is None else f"{pad}return {expr_text(node.value)}"]
    if isinstance(node, A.Break):
        return [f"{pad}break"]
    if isinstance(node, A.Continue):
        return [f"{pad}continue"]
    if isinstance(node, A.Assert):
        return [f"{pad}assert {expr_text(node.cond)}"]
    if isinstance(node, A.ExprStmt):
        return [f"{pad}{expr_text(node.expr)}"]
    raise TypeError(f"not a statement: {node!r}")


def to_source(program: A.Program) -> str:
    return "\n".join(_block(program.body, 0)) + "\n"
