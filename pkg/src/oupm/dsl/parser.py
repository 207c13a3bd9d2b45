"""Recursive-descent parser producing :mod:`oupm.dsl.ast` trees.

The grammar is documented in ``docs/grammar.md``.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from ..errors import ParseError
from . import ast as A
from .lexer import Token, tokenize

_CMP_OPS = ("=", "==", "!=", "<", ">", "<=", ">=")


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def loc(self, t: Optional[Token] = None) -> A.Loc:
        t = t or self.tok
        return A.Loc(t.line, t.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "kw") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def fail(self, expected) -> None:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"unexpected {found}", t.line, t.col, expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail([repr(text)])
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.fail(["identifier"])
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "number" or not t.text.isdigit():
            self.fail(["integer"])
        self.i += 1
        return int(t.text)

    # -- program ------------------------------------------------------------

    def program(self) -> A.Ast:
        decls = []
        while self.tok.kind != "eof":
            decls.append(self.declaration())
        return A.Ast(tuple(decls))

    def declaration(self):
        t = self.tok
        loc = self.loc()
        if self.accept("type"):
            name = self.ident()
            self.expect(";")
            return A.TypeDecl(name, loc=loc)
        if self.accept("origin"):
            ret = self.ident()
            name = self.ident()
            self.expect("(")
            arg = self.ident()
            self.expect(")")
            self.expect(";")
            return A.OriginFuncDecl(ret, name, arg, loc=loc)
        if self.accept("random"):
            ret = self.ident()
            name = self.ident()
            args: Tuple[str, ...] = ()
            if self.accept("("):
                args = self.ident_list(")")
            self.expect(";")
            return A.RandomFuncDecl(ret, name, args, loc=loc)
        if self.accept("guaranteed"):
            typ = self.ident()
            first = self.ident()
            if self.accept("["):
                n = self.integer()
                self.expect("]")
                self.expect(";")
                return A.GuaranteedDecl(typ, (first,), n, loc=loc)
            syms = [first]
            while self.accept(","):
                syms.append(self.ident())
            self.expect(";")
            return A.GuaranteedDecl(typ, tuple(syms), loc=loc)
        if self.accept("#"):
            typ = self.ident()
            bindings = []
            if self.accept("("):
                while True:
                    fn = self.ident()
                    self.expect("=")
                    var = self.ident()
                    bindings.append((fn, var))
                    if self.accept(")"):
                        break
                    if not self.accept(","):
                        self.fail(["','", "')'"])
            tree = self.body()
            self.expect(";")
            return A.NumberStmt(typ, tuple(bindings), tree, loc=loc)
        if self.accept("obs"):
            return self.obs(loc)
        if self.accept("query"):
            term = self.expr()
            self.expect(";")
            return A.QueryStmt(term, loc=loc)
        if t.kind == "ident":
            func = self.ident()
            params: Tuple[str, ...] = ()
            if self.accept("("):
                params = self.ident_list(")")
            tree = self.body()
            self.expect(";")
            return A.DependencyStmt(func, params, tree, loc=loc)
        self.fail(["'type'", "'origin'", "'random'", "'guaranteed'", "'#'",
                   "'obs'", "'query'", "identifier"])

    def ident_list(self, close: str) -> Tuple[str, ...]:
        out = []
        if self.accept(close):
            return ()
        while True:
            out.append(self.ident())
            if self.accept(close):
                return tuple(out)
            if not self.accept(","):
                self.fail(["','", repr(close)])

    def obs(self, loc: A.Loc) -> A.ObsStmt:
        if self.at("{") and self.peek().kind == "ident" and self.peek(2).kind == "ident":
            self.expect("{")
            typ = self.ident()
            var = self.ident()
            self.expect("}")
            self.expect("=")
            self.expect("{")
            syms = self.ident_list("}")
            self.expect(";")
            return A.ObsStmt(set_type=typ, set_var=var, set_symbols=syms, loc=loc)
        term = self.additive()
        if not (self.accept("=") or self.accept("==")):
            self.fail(["'='"])
        value = self.expr()
        self.expect(";")
        return A.ObsStmt(term=term, value=value, loc=loc)

    # -- dependency trees ---------------------------------------------------

    def body(self):
        return self.tree()

    def tree(self):
        loc = self.loc()
        if self.accept("{"):
            inner = self.tree()
            self.expect("}")
            return inner
        if self.accept("if"):
            return self._if_rest(loc)
        if self.at("~"):
            return self.leaf()
        self.fail(["'if'", "'~'", "'{'"])

    def _if_rest(self, loc):
        cond = self.expr()
        self.expect("then")
        then = self.tree()
        orelse = None
        eloc = self.loc()
        if self.accept("elseif"):
            orelse = self._if_rest(eloc)
        elif self.accept("else"):
            orelse = self.tree()
        return A.IfTree(cond, then, orelse, loc=loc)

    def leaf(self) -> A.Leaf:
        loc = self.loc()
        self.expect("~")
        dist = self.ident()
        params: Tuple = ()
        args = None
        if self.accept("["):
            params = self.expr_list("]")
        if self.accept("("):
            args = self.expr_list(")")
        return A.Leaf(dist, params, args, loc=loc)

    def expr_list(self, close: str) -> Tuple:
        out = []
        if self.accept(close):
            return ()
        while True:
            out.append(self.expr())
            if self.accept(close):
                return tuple(out)
            if not self.accept(","):
                self.fail(["','", repr(close)])

    # -- expressions --------------------------------------------------------

    def expr(self):
        return self.disjunction()

    def disjunction(self):
        left = self.conjunction()
        while self.at("|"):
            loc = self.loc()
            self.i += 1
            left = A.BinOp("|", left, self.conjunction(), loc=loc)
        return left

    def conjunction(self):
        left = self.negation()
        while self.at("&"):
            loc = self.loc()
            self.i += 1
            left = A.BinOp("&", left, self.negation(), loc=loc)
        return left

    def negation(self):
        if self.at("!"):
            loc = self.loc()
            self.i += 1
            return A.UnOp("!", self.negation(), loc=loc)
        return self.comparison()

    def comparison(self):
        left = self.additive()
        t = self.tok
        if t.kind == "op" and t.text in _CMP_OPS:
            self.i += 1
            op = "=" if t.text == "==" else t.text
            left = A.BinOp(op, left, self.additive(), loc=self.loc(t))
        return left

    def additive(self):
        left = self.multiplicative()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            t = self.tok
            self.i += 1
            left = A.BinOp(t.text, left, self.multiplicative(), loc=self.loc(t))
        return left

    def multiplicative(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/", "%"):
            t = self.tok
            self.i += 1
            left = A.BinOp(t.text, left, self.unary(), loc=self.loc(t))
        return left

    def unary(self):
        if self.at("-"):
            loc = self.loc()
            self.i += 1
            if self.tok.kind == "number":
                lit = self.primary()
                return A.Lit(-lit.value, loc=loc)
            return A.UnOp("-", self.unary(), loc=loc)
        return self.primary()

    def primary(self):
        t = self.tok
        loc = self.loc()
        if t.kind == "number":
            self.i += 1
            text = t.text
            if any(c in text for c in ".eE"):
                return A.Lit(float(text), loc=loc)
            return A.Lit(int(text), loc=loc)
        if t.kind == "kw" and t.text in ("true", "false", "null"):
            self.i += 1
            return A.Lit({"true": True, "false": False, "null": None}[t.text], loc=loc)
        if t.kind == "ident":
            self.i += 1
            if self.accept("("):
                return A.Call(t.text, self.expr_list(")"), loc=loc)
            return A.Name(t.text, loc=loc)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("["):
            return A.ListLit(self.expr_list("]"), loc=loc)
        if self.accept("{"):
            if self.tok.kind == "ident" and self.peek().kind == "ident" and self.peek(2).text == "}":
                typ = self.ident()
                var = self.ident()
                self.expect("}")
                return A.SetOf(typ, var, loc=loc)
            items = []
            if self.accept("}"):
                return A.MapLit((), loc=loc)
            while True:
                k = self.expr()
                self.expect("->")
                v = self.expr()
                items.append((k, v))
                if self.accept("}"):
                    return A.MapLit(tuple(items), loc=loc)
                if not self.accept(","):
                    self.fail(["','", "'}'"])
        self.fail(["expression"])


def parse(source: str) -> A.Ast:
    """Parse model source text.  Raises :class:`ParseError` on the first syntax error."""
    return _Parser(tokenize(source)).program()
