"""Canonical pretty-printer.  ``parse(pretty(parse(s))) == parse(s)``."""

from __future__ import annotations

from . import ast as A


def _lit(v) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def expr(e) -> str:
    if isinstance(e, A.Lit):
        return _lit(e.value)
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.Call):
        return f"{e.func}({', '.join(expr(a) for a in e.args)})"
    if isinstance(e, A.BinOp):
        return f"({expr(e.left)} {e.op} {expr(e.right)})"
    if isinstance(e, A.UnOp):
        return f"({e.op}({expr(e.operand)}))"
    if isinstance(e, A.SetOf):
        return f"{{{e.type} {e.var}}}"
    if isinstance(e, A.ListLit):
        return "[" + ", ".join(expr(x) for x in e.items) + "]"
    if isinstance(e, A.MapLit):
        return "{" + ", ".join(f"{expr(k)} -> {expr(v)}" for k, v in e.items) + "}"
    raise TypeError(f"not an expression: {e!r}")


def tree(t, indent: int = 1) -> str:
    pad = "  " * indent
    if isinstance(t, A.Leaf):
        s = "~" + t.dist
        if t.params:
            s += "[" + ", ".join(expr(p) for p in t.params) + "]"
        if t.args is not None:
            s += "(" + ", ".join(expr(a) for a in t.args) + ")"
        return s
    then = tree(t.then, indent + 1)
    if isinstance(t.then, A.IfTree):
        # braces keep a following else from binding to the inner if
        then = "{ " + then + " }"
    s = f"if {expr(t.cond)} then\n{pad}  {then}"
    if t.orelse is not None:
        s += f"\n{pad}else\n{pad}  {tree(t.orelse, indent + 1)}"
    return s


def declaration(d) -> str:
    if isinstance(d, A.TypeDecl):
        return f"type {d.name};"
    if isinstance(d, A.OriginFuncDecl):
        return f"origin {d.ret_type} {d.name}({d.arg_type});"
    if isinstance(d, A.RandomFuncDecl):
        args = f"({', '.join(d.arg_types)})" if d.arg_types else ""
        return f"random {d.ret_type} {d.name}{args};"
    if isinstance(d, A.GuaranteedDecl):
        if d.count is not None:
            return f"guaranteed {d.type} {d.symbols[0]}[{d.count}];"
        return f"guaranteed {d.type} {', '.join(d.symbols)};"
    if isinstance(d, A.NumberStmt):
        b = ""
        if d.bindings:
            b = "(" + ", ".join(f"{f} = {v}" for f, v in d.bindings) + ")"
        return f"#{d.type}{b} {{\n  {tree(d.tree)}\n}};"
    if isinstance(d, A.DependencyStmt):
        p = f"({', '.join(d.params)})" if d.params else ""
        return f"{d.func}{p} {{\n  {tree(d.tree)}\n}};"
    if isinstance(d, A.ObsStmt):
        if d.is_set:
            return f"obs {{{d.set_type} {d.set_var}}} = {{{', '.join(d.set_symbols)}}};"
        return f"obs {expr(d.term)} = {expr(d.value)};"
    if isinstance(d, A.QueryStmt):
        return f"query {expr(d.term)};"
    raise TypeError(f"not a declaration: {d!r}")


def pretty(program: A.Ast) -> str:
    return "\n".join(declaration(d) for d in program.declarations) + ("\n" if program.declarations else "")
