"""Name resolution, type checking and static switching analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from ..errors import Diagnostic, ModelError
from . import ast as A

BUILTIN_TYPES = ("Boolean", "Integer", "NaturalNum", "Real")
NUMERIC = frozenset({"Integer", "NaturalNum", "Real"})
INTEGRAL = frozenset({"Integer", "NaturalNum"})
DISTRIBUTIONS = ("Categorical", "Bernoulli", "Poisson", "TabularCPD",
                 "UniformChoice", "UniformReal", "UnivarGaussian")

ANY = "?"        # type of an expression that already produced a diagnostic
NULL = "null"


@dataclass
class TypeInfo:
    name: str
    builtin: bool = False
    symbols: Tuple[str, ...] = ()          # guaranteed objects, declaration order
    number_stmts: List[A.NumberStmt] = field(default_factory=list)
    origin_funcs: List[str] = field(default_factory=list)
    evidence_symbols: Tuple[str, ...] = ()  # from set evidence
    loc: Optional[A.Loc] = None

    @property
    def generated(self) -> bool:
        return bool(self.number_stmts)


@dataclass
class FuncInfo:
    name: str
    kind: str                      # "random" or "origin"
    ret_type: str
    arg_types: Tuple[str, ...]
    loc: Optional[A.Loc] = None
    params: Tuple[str, ...] = ()
    tree: Optional[A.Tree] = None
    guard_funcs: FrozenSet[str] = frozenset()
    ref_funcs: FrozenSet[str] = frozenset()


@dataclass
class Evidence:
    func: str
    args: Tuple[A.Expr, ...]       # constant expressions
    value: A.Expr
    loc: Optional[A.Loc] = None


@dataclass
class Query:
    term: A.Expr
    type: str
    text: str
    loc: Optional[A.Loc] = None


@dataclass
class TypedModel:
    ast: A.Ast
    types: Dict[str, TypeInfo]
    functions: Dict[str, FuncInfo]
    symbols: Dict[str, str]                       # object symbol -> type
    evidence: List[Evidence]
    set_evidence: Dict[str, Tuple[str, ...]]      # type -> observed symbols
    queries: List[Query]
    may_switch: FrozenSet[str]
    child_funcs: Dict[str, FrozenSet[str]]        # function -> functions whose trees reference it
    tabular_arg_types: Dict[int, Tuple[str, ...]] = field(default_factory=dict)  # id(leaf) -> types

    def finite_type_domain(self, t: str) -> Optional[Tuple]:
        """Symbols of a closed finite type, (True, False) for Boolean, else None."""
        if t == "Boolean":
            return (True, False)
        info = self.types.get(t)
        if info is None or info.builtin or info.generated:
            return None
        return info.symbols


def _compatible(a: str, b: str) -> bool:
    if ANY in (a, b) or NULL in (a, b) or a == b:
        return True
    return a in NUMERIC and b in NUMERIC


class _Checker:
    def __init__(self, program: A.Ast):
        self.ast = program
        self.diags: List[Diagnostic] = []
        self.types: Dict[str, TypeInfo] = {t: TypeInfo(t, builtin=True) for t in BUILTIN_TYPES}
        self.functions: Dict[str, FuncInfo] = {}
        self.symbols: Dict[str, str] = {}
        self.set_evidence: Dict[str, Tuple[str, ...]] = {}
        self.tabular_arg_types: Dict[int, Tuple[str, ...]] = {}

    def error(self, node, msg: str) -> None:
        loc = getattr(node, "loc", None)
        line, col = (loc.line, loc.col) if loc else (0, 0)
        self.diags.append(Diagnostic(line, col, msg))

    # -- declarations -------------------------------------------------------

    def collect(self) -> None:
        decls = self.ast.declarations
        for d in decls:
            if isinstance(d, A.TypeDecl):
                if d.name in self.types:
                    self.error(d, f"duplicate type '{d.name}'")
                else:
                    self.types[d.name] = TypeInfo(d.name, loc=d.loc)
        for d in decls:
            if isinstance(d, (A.RandomFuncDecl, A.OriginFuncDecl)):
                if d.name in self.functions:
                    self.error(d, f"duplicate function '{d.name}'")
                    continue
                args = (d.arg_type,) if isinstance(d, A.OriginFuncDecl) else d.arg_types
                kind = "origin" if isinstance(d, A.OriginFuncDecl) else "random"
                for t in (d.ret_type,) + tuple(args):
                    self.need_type(d, t)
                self.functions[d.name] = FuncInfo(d.name, kind, d.ret_type, tuple(args), loc=d.loc)
                if kind == "origin" and d.arg_type in self.types:
                    self.types[d.arg_type].origin_funcs.append(d.name)
            elif isinstance(d, A.GuaranteedDecl):
                if not self.need_type(d, d.type):
                    continue
                info = self.types[d.type]
                if info.builtin:
                    self.error(d, f"cannot declare objects of built-in type '{d.type}'")
                    continue
                for s in d.expand():
                    self.add_symbol(d, s, d.type)
                info.symbols += d.expand()
            elif isinstance(d, A.NumberStmt):
                if self.need_type(d, d.type):
                    if self.types[d.type].builtin:
                        self.error(d, f"number statement for built-in type '{d.type}'")
                    else:
                        self.types[d.type].number_stmts.append(d)
        for d in decls:
            if isinstance(d, A.ObsStmt) and d.is_set:
                if not self.need_type(d, d.set_type):
                    continue
                info = self.types[d.set_type]
                if not info.generated:
                    self.error(d, f"set evidence names type '{d.set_type}' with no number statement")
                    continue
                if d.set_type in self.set_evidence:
                    self.error(d, f"duplicate set evidence for type '{d.set_type}'")
                    continue
                for s in d.set_symbols:
                    self.add_symbol(d, s, d.set_type)
                self.set_evidence[d.set_type] = d.set_symbols
                info.evidence_symbols = d.set_symbols

    def need_type(self, node, t: str) -> bool:
        if t not in self.types:
            self.error(node, f"undeclared name '{t}' (type)")
            return False
        return True

    def add_symbol(self, node, s: str, t: str) -> None:
        if s in self.symbols or s in self.functions:
            self.error(node, f"duplicate name '{s}'")
        else:
            self.symbols[s] = t

    def check_types(self) -> None:
        for info in self.types.values():
            if info.builtin or not info.generated:
                continue
            stmts = info.number_stmts
            if info.symbols:
                self.error(stmts[0], f"unsupported: type '{info.name}' has both guaranteed objects and a number statement")
            if len(info.origin_funcs) > 1:
                self.error(stmts[0], f"unsupported: type '{info.name}' has more than one origin function")
            bound = [s for s in stmts if s.bindings]
            unbound = [s for s in stmts if not s.bindings]
            if len(bound) > 1 or len(unbound) > 1:
                self.error(stmts[-1], f"unsupported: type '{info.name}' needs at most one unbound and one bound number statement")
            for s in bound:
                if len(s.bindings) > 1:
                    self.error(s, "unsupported: number statement with more than one origin binding")
                fn = s.bindings[0][0]
                f = self.functions.get(fn)
                if f is None:
                    self.error(s, f"undeclared name '{fn}'")
                elif f.kind != "origin" or f.arg_types != (info.name,):
                    self.error(s, f"'{fn}' is not an origin function of type '{info.name}'")
                elif self.types.get(f.ret_type) is not None and self.types[f.ret_type].builtin:
                    self.error(s, f"origin function '{fn}' must return a user-defined type")

    # -- expressions --------------------------------------------------------

    def expr(self, e, scope: Dict[str, str], guard_refs: Optional[set], refs: set, in_guard=False) -> str:
        if isinstance(e, A.Lit):
            v = e.value
            if v is None:
                return NULL
            if isinstance(v, bool):
                return "Boolean"
            if isinstance(v, int):
                return "Integer"
            return "Real"
        if isinstance(e, A.Name):
            if e.id in scope:
                return scope[e.id]
            if e.id in self.symbols:
                return self.symbols[e.id]
            f = self.functions.get(e.id)
            if f is not None:
                return self._call(e, f, (), scope, guard_refs, refs, in_guard)
            self.error(e, f"undeclared name '{e.id}'")
            return ANY
        if isinstance(e, A.Call):
            f = self.functions.get(e.func)
            if f is None:
                self.error(e, f"undeclared name '{e.func}'")
                for a in e.args:
                    self.expr(a, scope, guard_refs, refs, in_guard)
                return ANY
            return self._call(e, f, e.args, scope, guard_refs, refs, in_guard)
        if isinstance(e, A.BinOp):
            lt = self.expr(e.left, scope, guard_refs, refs, in_guard)
            rt = self.expr(e.right, scope, guard_refs, refs, in_guard)
            op = e.op
            if op in ("&", "|"):
                for t in (lt, rt):
                    if not _compatible(t, "Boolean") or t == NULL:
                        self.error(e, f"type mismatch: operator '{op}' needs Boolean operands, got {t}")
                return "Boolean"
            if op in ("=", "!="):
                if not _compatible(lt, rt):
                    self.error(e, f"type mismatch: cannot compare {lt} with {rt}")
                return "Boolean"
            if op in ("<", ">", "<=", ">="):
                for t in (lt, rt):
                    if t not in NUMERIC and t != ANY:
                        self.error(e, f"type mismatch: operator '{op}' needs numeric operands, got {t}")
                return "Boolean"
            for t in (lt, rt):
                if t not in NUMERIC and t != ANY:
                    self.error(e, f"type mismatch: operator '{op}' needs numeric operands, got {t}")
            if op == "/" or "Real" in (lt, rt):
                return "Real"
            if ANY in (lt, rt):
                return ANY
            return "Integer"
        if isinstance(e, A.UnOp):
            t = self.expr(e.operand, scope, guard_refs, refs, in_guard)
            if e.op == "!":
                if t not in ("Boolean", ANY):
                    self.error(e, f"type mismatch: '!' needs a Boolean operand, got {t}")
                return "Boolean"
            if t not in NUMERIC and t != ANY:
                self.error(e, f"type mismatch: unary '-' needs a numeric operand, got {t}")
            return t
        if isinstance(e, A.SetOf):
            if e.type not in self.types:
                self.error(e, f"undeclared name '{e.type}' (type)")
                return ANY
            if self.types[e.type].builtin:
                self.error(e, f"cannot form the set of all objects of built-in type '{e.type}'")
            if self.types[e.type].generated:
                refs.add("#" + e.type)
            return "Set[" + e.type + "]"
        if isinstance(e, (A.ListLit, A.MapLit)):
            self.error(e, "list and map literals are only allowed as distribution parameters")
            return ANY
        raise TypeError(e)

    def _call(self, e, f: FuncInfo, args, scope, guard_refs, refs, in_guard) -> str:
        refs.add(f.name)
        if in_guard and guard_refs is not None:
            guard_refs.add(f.name)
        if len(args) != len(f.arg_types):
            self.error(e, f"arity mismatch: '{f.name}' takes {len(f.arg_types)} argument(s), got {len(args)}")
        for a, t in zip(args, f.arg_types):
            at = self.expr(a, scope, guard_refs, refs, in_guard)
            if not _compatible(at, t):
                self.error(a, f"type mismatch: argument of '{f.name}' should be {t}, got {at}")
        for a in args[len(f.arg_types):]:
            self.expr(a, scope, guard_refs, refs, in_guard)
        return f.ret_type

    # -- trees --------------------------------------------------------------

    def tree(self, t, ret: str, scope, guard_refs: set, refs: set, number: bool) -> None:
        if isinstance(t, A.IfTree):
            ct = self.expr(t.cond, scope, guard_refs, refs, in_guard=True)
            if ct not in ("Boolean", ANY):
                self.error(t.cond, f"type mismatch: guard must be Boolean, got {ct}")
            self.tree(t.then, ret, scope, guard_refs, refs, number)
            if t.orelse is not None:
                self.tree(t.orelse, ret, scope, guard_refs, refs, number)
            return
        self.leaf(t, ret, scope, guard_refs, refs, number)

    def leaf(self, leaf: A.Leaf, ret: str, scope, guard_refs, refs, number: bool) -> None:
        name = leaf.dist
        params, args = leaf.params, leaf.args
        nargs = 0 if args is None else len(args)

        def arity(ok: bool, want: str):
            if not ok:
                self.error(leaf, f"distribution arity mismatch: {name} takes {want}")
            return ok

        def numeric(e):
            t = self.expr(e, scope, guard_refs, refs)
            if t not in NUMERIC and t != ANY:
                self.error(e, f"type mismatch: {name} parameter must be numeric, got {t}")

        def returns(*allowed):
            if ret not in allowed and ret != ANY:
                self.error(leaf, f"type mismatch: {name} cannot produce values of type {ret}")

        if name not in DISTRIBUTIONS:
            self.error(leaf, f"unknown distribution '{name}'")
            return
        if name == "Categorical":
            if arity(len(params) == 1 and nargs == 0 and isinstance(params[0], A.MapLit),
                     "one map parameter {value -> probability, ...}"):
                for k, v in params[0].items:
                    kt = self.const_type(k)
                    if kt is None:
                        self.error(k, "Categorical outcomes must be literals or object symbols")
                    elif not _compatible(kt, ret):
                        self.error(k, f"type mismatch: outcome of type {kt} for a {ret}-valued function")
                    numeric(v)
        elif name in ("Bernoulli", "Poisson"):
            if arity(len(params) + nargs == 1, "exactly one parameter"):
                numeric(params[0] if params else args[0])
            if name == "Bernoulli":
                returns("Boolean", "Integer", "NaturalNum")
            else:
                returns("Integer", "NaturalNum")
        elif name == "TabularCPD":
            ok = arity(len(params) >= 1 and all(isinstance(p, A.ListLit) for p in params),
                       "a list of probability rows")
            cards = []
            arg_types = []
            for a in args or ():
                at = self.expr(a, scope, guard_refs, refs)
                arg_types.append(at)
                dom = self.finite_domain(at)
                if dom is None and at != ANY:
                    self.error(a, f"TabularCPD argument must have a finite declared domain, got {at}")
                cards.append(len(dom) if dom is not None else None)
            self.tabular_arg_types[id(leaf)] = tuple(arg_types)
            out = self.finite_domain(ret)
            if out is None and ret != ANY:
                self.error(leaf, f"TabularCPD cannot produce values of type {ret}")
            if ok:
                for row in params:
                    for x in row.items:
                        if self.const_type(x) not in ("Integer", "Real"):
                            self.error(x, "TabularCPD entries must be numeric literals")
                if None not in cards:
                    want = 1
                    for c in cards:
                        want *= c
                    if len(params) != want:
                        self.error(leaf, f"TabularCPD has {len(params)} row(s), expected {want}")
                if out is not None:
                    for row in params:
                        if len(row.items) != len(out):
                            self.error(row, f"TabularCPD row has {len(row.items)} entries, expected {len(out)}")
        elif name == "UniformChoice":
            if arity(len(params) + nargs == 1, "one set argument"):
                e = params[0] if params else args[0]
                t = self.expr(e, scope, guard_refs, refs)
                if not t.startswith("Set[") and t != ANY:
                    self.error(e, f"type mismatch: UniformChoice needs a set, got {t}")
                elif t.startswith("Set[") and not _compatible(t[4:-1], ret):
                    self.error(leaf, f"type mismatch: UniformChoice over {t[4:-1]} for a {ret}-valued function")
        elif name == "UniformReal":
            if arity(len(params) == 2 and nargs == 0, "two parameters [lo, hi]"):
                numeric(params[0])
                numeric(params[1])
            returns("Real")
        elif name == "UnivarGaussian":
            if arity(len(params) == 1 and nargs == 1, "[variance](mean)"):
                numeric(params[0])
                numeric(args[0])
            returns("Real")
        if number and name not in ("Poisson", "Categorical", "TabularCPD") :
            self.error(leaf, f"{name} cannot be used in a number statement")

    def const_type(self, e) -> Optional[str]:
        if isinstance(e, A.Lit):
            return self.expr(e, {}, None, set())
        if isinstance(e, A.Name) and e.id in self.symbols:
            return self.symbols[e.id]
        return None

    def finite_domain(self, t: str):
        if t == "Boolean":
            return (True, False)
        info = self.types.get(t)
        if info is None or info.builtin or info.generated:
            return None
        return info.symbols

    # -- statements ---------------------------------------------------------

    def check_dependencies(self) -> None:
        seen: Dict[str, A.DependencyStmt] = {}
        for d in self.ast.of(A.DependencyStmt):
            f = self.functions.get(d.func)
            if f is None:
                self.error(d, f"undeclared name '{d.func}'")
                continue
            if f.kind == "origin":
                self.error(d, f"origin function '{d.func}' cannot have a dependency statement")
                continue
            if d.func in seen:
                self.error(d, f"duplicate dependency statement for '{d.func}'")
                continue
            seen[d.func] = d
            if len(d.params) != len(f.arg_types):
                self.error(d, f"arity mismatch: '{d.func}' takes {len(f.arg_types)} argument(s), got {len(d.params)}")
            scope = dict(zip(d.params, f.arg_types))
            guard_refs: set = set()
            refs: set = set()
            self.tree(d.tree, f.ret_type, scope, guard_refs, refs, number=False)
            self.self_loops(d, d.tree)
            f.params, f.tree = d.params, d.tree
            f.guard_funcs, f.ref_funcs = frozenset(guard_refs), frozenset(refs)
        for f in self.functions.values():
            if f.kind == "random" and f.name not in seen:
                self.error(f, f"no dependency statement for '{f.name}'")

    def self_loops(self, d: A.DependencyStmt, t) -> None:
        own = tuple(A.Name(p) for p in d.params)

        def walk(e):
            if isinstance(e, A.Call):
                if e.func == d.func and e.args == own:
                    self.error(e, f"'{d.func}' depends on itself with the same arguments")
                for a in e.args:
                    walk(a)
            elif isinstance(e, A.Name):
                if e.id == d.func and not own:
                    self.error(e, f"'{d.func}' depends on itself with the same arguments")
            elif isinstance(e, A.BinOp):
                walk(e.left)
                walk(e.right)
            elif isinstance(e, A.UnOp):
                walk(e.operand)
            elif isinstance(e, A.IfTree):
                walk(e.cond)
                walk(e.then)
                if e.orelse is not None:
                    walk(e.orelse)
            elif isinstance(e, A.Leaf):
                for p in e.params:
                    walk(p)
                for a in e.args or ():
                    walk(a)
            elif isinstance(e, A.ListLit):
                for x in e.items:
                    walk(x)
            elif isinstance(e, A.MapLit):
                for k, v in e.items:
                    walk(k)
                    walk(v)
        walk(t)

    def check_number_stmts(self) -> Dict[str, set]:
        refs_by_type: Dict[str, set] = {}
        for d in self.ast.of(A.NumberStmt):
            info = self.types.get(d.type)
            scope = {}
            for fn, var in d.bindings:
                f = self.functions.get(fn)
                if f is not None:
                    scope[var] = f.ret_type
            refs: set = set()
            self.tree(d.tree, "NaturalNum", scope, set(), refs, number=True)
            several_groups = info is not None and len(info.number_stmts) > 1
            if several_groups or d.bindings:
                self.poisson_only(d, d.tree)
            refs_by_type.setdefault(d.type, set()).update(refs)
            for fn, _ in d.bindings:
                f = self.functions.get(fn)
                if f is not None and self.types.get(f.ret_type) is not None and self.types[f.ret_type].generated:
                    refs_by_type[d.type].add("#" + f.ret_type)
        return refs_by_type

    def poisson_only(self, d, t) -> None:
        if isinstance(t, A.IfTree):
            self.poisson_only(d, t.then)
            if t.orelse is None:
                self.error(t, "unsupported: a bound number statement needs an else branch")
            else:
                self.poisson_only(d, t.orelse)
        elif t.dist != "Poisson":
            self.error(t, "unsupported: number statements for a type with several generating groups must use Poisson")

    def check_evidence(self) -> List[Evidence]:
        out = []
        for d in self.ast.of(A.ObsStmt):
            if d.is_set:
                continue
            term = d.term
            if isinstance(term, A.Name) and term.id in self.functions:
                func, args = term.id, ()
            elif isinstance(term, A.Call):
                func, args = term.func, term.args
            else:
                if isinstance(term, A.Name) and term.id not in self.symbols:
                    self.error(term, f"undeclared name '{term.id}'")
                else:
                    self.error(term, "evidence term must be a ground function application")
                self.value_type(d.value)
                continue
            f = self.functions.get(func)
            if f is None:
                self.error(term, f"undeclared name '{func}'")
                self.value_type(d.value)
                continue
            tt = self.expr(term, {}, None, set())
            for a in args:
                if not (isinstance(a, A.Lit) or (isinstance(a, A.Name) and a.id in self.symbols)):
                    self.error(a, "evidence arguments must be literals or object symbols")
            vt = self.value_type(d.value)
            if vt is not None and not _compatible(vt, tt):
                self.error(d.value, f"type mismatch: observed {vt} for a {tt}-valued term")
            out.append(Evidence(func, tuple(args), d.value, loc=d.loc))
        return out

    def value_type(self, v) -> Optional[str]:
        if isinstance(v, A.Name) and v.id not in self.symbols:
            self.error(v, f"undeclared name '{v.id}'")
            return None
        t = self.const_type(v)
        if t is None:
            self.error(v, "observed value must be a literal or an object symbol")
        return t

    def check_queries(self) -> List[Query]:
        from .printer import expr as show
        out = []
        for d in self.ast.of(A.QueryStmt):
            t = self.expr(d.term, {}, None, set())
            out.append(Query(d.term, t, show(d.term), loc=d.loc))
        return out


def validate(program: A.Ast) -> TypedModel:
    """Check a parsed program.  Raises :class:`ModelError` listing every problem found."""
    c = _Checker(program)
    c.collect()
    c.check_types()
    c.check_dependencies()
    number_refs = c.check_number_stmts()
    evidence = c.check_evidence()
    queries = c.check_queries()
    if c.diags:
        raise ModelError(c.diags)

    may_switch = set()
    children: Dict[str, set] = {}
    for f in c.functions.values():
        may_switch |= f.guard_funcs
        for r in f.ref_funcs:
            children.setdefault(r, set()).add(f.name)
    for t, refs in number_refs.items():
        for r in refs:
            children.setdefault(r, set()).add("#" + t)
    for t, info in c.types.items():
        if info.generated:
            # origin variables are drawn in proportion to each group's rate
            for f in info.origin_funcs:
                for r in number_refs.get(t, ()):
                    children.setdefault(r, set()).add(f)
    return TypedModel(
        ast=program, types=c.types, functions=c.functions, symbols=c.symbols,
        evidence=evidence, set_evidence=c.set_evidence, queries=queries,
        may_switch=frozenset(may_switch),
        child_funcs={k: frozenset(v) for k, v in children.items()},
        tabular_arg_types=c.tabular_arg_types,
    )
