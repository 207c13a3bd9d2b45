"""Lower a checked program into executable closures.

Each dependency tree becomes a function ``(ctx, args) -> Distribution`` where
``ctx`` is an :class:`EvalCtx` that hands out variable values and records the
order in which they were first referenced.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

from ..cbn import distributions as D
from ..cbn.values import QUERY, Obj, Var, number_var
from ..errors import ModelRuntimeError
from . import ast as A
from .validate import TypedModel

FINITE = "finite"
FINITE_PER_WORLD = "finite-per-world"
COUNTABLE = "countably-infinite"
CONTINUOUS = "continuous"

_ABSENT = object()


class Missing(Exception):
    """Raised during evaluation at the first reference to an unassigned variable."""
    __slots__ = ("var",)

    def __init__(self, var):
        self.var = var


class EvalCtx:
    """Records first references, which of them happened inside a guard, and
    which can change what is referenced afterwards (pivots): guard
    references, references inside a call's arguments, and object counts."""
    __slots__ = ("values", "refs", "seen", "guards", "pivots", "guard", "arg")

    def __init__(self, values):
        self.values = values
        self.refs: List[Var] = []
        self.seen = set()
        self.guards: Dict[Var, None] = {}
        self.pivots: Dict[Var, None] = {}
        self.guard = 0
        self.arg = 0

    def get(self, var):
        if var not in self.seen:
            self.seen.add(var)
            self.refs.append(var)
        if self.guard:
            self.guards[var] = None
            self.pivots[var] = None
        elif self.arg:
            self.pivots[var] = None
        v = self.values.get(var, _ABSENT)
        if v is _ABSENT:
            raise Missing(var)
        return v

    def get_count(self, var):
        # number variables read to enumerate objects never act as guards
        if var not in self.seen:
            self.seen.add(var)
            self.refs.append(var)
        self.pivots[var] = None
        v = self.values.get(var, _ABSENT)
        if v is _ABSENT:
            raise Missing(var)
        return v


@dataclass
class FuncRuntime:
    name: str
    kind: str                              # random, origin or number
    ret_type: str
    arg_types: Tuple[str, ...]
    domain_class: str
    static_domain: Optional[Tuple] = None  # for FINITE functions
    dist: Callable = None                  # (ctx, args) -> Distribution
    sup_density: float = 1.0
    generated_type: Optional[str] = None   # number variables: the counted type


@dataclass
class QueryRuntime:
    text: str
    type: str
    value: Callable                        # ctx -> value
    numeric_mean_only: bool = False


@dataclass
class Model:
    typed: TypedModel
    functions: Dict[str, FuncRuntime]
    evidence: Dict[Var, object]
    set_evidence: Dict[str, Tuple[str, ...]]
    symbol_objects: Dict[str, Obj]
    queries: List[QueryRuntime]
    schema: List[Tuple[str, str, str]]     # (origin function, object type, value type)
    may_switch: FrozenSet[str]
    generated_types: Tuple[str, ...]
    evidence_origin_funcs: FrozenSet[str] = field(default_factory=frozenset)

    def dist(self, ctx: EvalCtx, var: Var):
        return self.functions[var.func].dist(ctx, var.args)

    def query_value(self, ctx: EvalCtx, i: int):
        return self.queries[i].value(ctx)

    def evaluate(self, ctx: EvalCtx, node: Var):
        """Distribution of a variable, or the value of a query pseudo-node."""
        if node.func == QUERY:
            return self.queries[node.args[0]].value(ctx)
        return self.functions[node.func].dist(ctx, node.args)

    def finite_domain_class(self, func: str) -> str:
        return self.functions[func].domain_class

    def summary(self) -> List[str]:
        lines = []
        for f in self.functions.values():
            dom = ""
            if f.static_domain is not None:
                from ..cbn.values import fmt
                dom = " {" + ", ".join(fmt(v) for v in f.static_domain) + "}"
            sw = " switching" if f.name in self.may_switch else ""
            args = f"({', '.join(f.arg_types)})" if f.arg_types else ""
            lines.append(f"{f.kind} {f.ret_type} {f.name}{args}: {f.domain_class}{dom}{sw}")
        for fn, src, dst in self.schema:
            lines.append(f"child index: {dst} -> {src} objects via {fn}")
        return lines


class _Lowering:
    def __init__(self, tm: TypedModel):
        self.tm = tm
        self.symbol_objects: Dict[str, Obj] = {}
        for s, t in tm.symbols.items():
            info = tm.types[t]
            if s in info.evidence_symbols:
                self.symbol_objects[s] = Obj(t, info.evidence_symbols.index(s) + 1)
            else:
                self.symbol_objects[s] = Obj(t, s)
        self._obj_cache: Dict[Tuple[str, int], Tuple[Obj, ...]] = {}

    # -- constants ----------------------------------------------------------

    def const(self, e):
        if isinstance(e, A.Lit):
            return True, e.value
        if isinstance(e, A.Name) and e.id in self.symbol_objects:
            return True, self.symbol_objects[e.id]
        if isinstance(e, A.UnOp) and e.op == "-":
            ok, v = self.const(e.operand)
            if ok and isinstance(v, (int, float)) and not isinstance(v, bool):
                return True, -v
        return False, None

    def type_values(self, t: str) -> Optional[Tuple]:
        dom = self.tm.finite_type_domain(t)
        if dom is None:
            return None
        if t == "Boolean":
            return dom
        return tuple(self.symbol_objects[s] for s in dom)

    def objects(self, t: str, n: int) -> Tuple[Obj, ...]:
        key = (t, n)
        objs = self._obj_cache.get(key)
        if objs is None:
            objs = tuple(Obj(t, i) for i in range(1, n + 1))
            self._obj_cache[key] = objs
        return objs

    # -- expressions --------------------------------------------------------

    def expr(self, e, scope: Dict[str, int]):
        ok, v = self.const(e)
        if ok and not (isinstance(e, A.Name) and e.id in scope):
            return lambda c, a, v=v: v
        if isinstance(e, A.Name):
            if e.id in scope:
                i = scope[e.id]
                return lambda c, a: a[i]
            var = Var(e.id, ())
            return lambda c, a: c.get(var)
        if isinstance(e, A.Call):
            return self.call(e.func, [self.expr(x, scope) for x in e.args])
        if isinstance(e, A.BinOp):
            return self.binop(e.op, self.expr(e.left, scope), self.expr(e.right, scope))
        if isinstance(e, A.UnOp):
            f = self.expr(e.operand, scope)
            if e.op == "!":
                return lambda c, a: not f(c, a)

            def neg(c, a):
                x = f(c, a)
                if x is None:
                    raise ModelRuntimeError("arithmetic on null")
                return -x
            return neg
        if isinstance(e, A.SetOf):
            t = e.type
            if self.tm.types[t].generated:
                nv = number_var(t)
                objects = self.objects
                return lambda c, a: objects(t, c.get_count(nv))
            objs = self.type_values(t)
            return lambda c, a: objs
        raise TypeError(f"cannot lower {e!r}")

    def call(self, func: str, argfs):
        if len(argfs) == 1:
            g = argfs[0]

            def call1(c, a):
                c.arg += 1
                x = g(c, a)
                c.arg -= 1
                if x is None:
                    return None
                return c.get(Var(func, (x,)))
            return call1

        def calln(c, a):
            c.arg += 1
            xs = tuple([g(c, a) for g in argfs])
            c.arg -= 1
            if None in xs:
                return None
            return c.get(Var(func, xs))
        return calln

    def binop(self, op: str, lf, rf):
        if op == "&":
            return lambda c, a: bool(lf(c, a)) and bool(rf(c, a))
        if op == "|":
            return lambda c, a: bool(lf(c, a)) or bool(rf(c, a))
        if op == "=":
            return lambda c, a: lf(c, a) == rf(c, a)
        if op == "!=":
            return lambda c, a: lf(c, a) != rf(c, a)
        import operator
        fn = {"<": operator.lt, ">": operator.gt, "<=": operator.le, ">=": operator.ge,
              "+": operator.add, "-": operator.sub, "*": operator.mul,
              "/": operator.truediv, "%": operator.mod}[op]

        def arith(c, a):
            x = lf(c, a)
            y = rf(c, a)
            if x is None or y is None:
                raise ModelRuntimeError(f"operator '{op}' applied to null")
            try:
                return fn(x, y)
            except ZeroDivisionError:
                raise ModelRuntimeError(f"division by zero in '{op}'") from None
        return arith

    # -- trees --------------------------------------------------------------

    def tree(self, t, scope, ret: str):
        if isinstance(t, A.IfTree):
            cond = self.expr(t.cond, scope)
            then = self.tree(t.then, scope, ret)
            if t.orelse is None:
                null = D.NULL_DIST
                orelse = lambda c, a: null
            else:
                orelse = self.tree(t.orelse, scope, ret)

            def branch(c, a):
                c.guard += 1
                v = cond(c, a)
                c.guard -= 1
                if v:
                    return then(c, a)
                return orelse(c, a)
            return branch
        return self.leaf(t, scope, ret)

    def leaf(self, leaf: A.Leaf, scope, ret: str):
        name = leaf.dist
        params = leaf.params
        args = leaf.args or ()
        single = params[0] if params else (args[0] if args else None)

        def constant(dist):
            return lambda c, a: dist

        if name == "Categorical":
            keys = [self.const(k)[1] for k, _ in params[0].items]
            vals = [self.const(v) for _, v in params[0].items]
            if all(ok for ok, _ in vals):
                return constant(D.Categorical(keys, [v for _, v in vals]))
            pfs = [self.expr(v, scope) for _, v in params[0].items]
            return lambda c, a: D.Categorical(keys, [f(c, a) for f in pfs])
        if name == "Bernoulli":
            outcomes = (True, False) if ret == "Boolean" else (1, 0)
            ok, p = self.const(single)
            if ok:
                return constant(D.Bernoulli(p, outcomes))
            pf = self.expr(single, scope)
            return lambda c, a: D.Bernoulli(pf(c, a), outcomes)
        if name == "Poisson":
            ok, lam = self.const(single)
            if ok:
                return constant(D.Poisson(lam))
            lf = self.expr(single, scope)
            return lambda c, a: D.Poisson(lf(c, a))
        if name == "TabularCPD":
            out = self.type_values(ret) if ret != "NaturalNum" else None
            rows = []
            for row in params:
                probs = [self.const(x)[1] for x in row.items]
                rows.append(D.Categorical(out if out is not None else range(len(probs)), probs))
            if not args:
                return constant(rows[0])
            argfs = [self.expr(x, scope) for x in args]
            positions = []
            for t in self.tm.tabular_arg_types[id(leaf)]:
                positions.append({v: i for i, v in enumerate(self.type_values(t))})
            strides = []
            s = 1
            for pos in reversed(positions):
                strides.append(s)
                s *= len(pos)
            strides.reverse()
            table = list(zip(argfs, positions, strides))

            def tabular(c, a):
                idx = 0
                for f, pos, stride in table:
                    v = f(c, a)
                    if v is None:
                        return D.NULL_DIST
                    idx += pos[v] * stride
                return rows[idx]
            return tabular
        if name == "UniformChoice":
            sf = self.expr(single, scope)
            return lambda c, a: D.UniformChoice(sf(c, a))
        if name == "UniformReal":
            (ok1, lo), (ok2, hi) = self.const(params[0]), self.const(params[1])
            if ok1 and ok2:
                return constant(D.UniformReal(lo, hi))
            lof, hif = self.expr(params[0], scope), self.expr(params[1], scope)
            return lambda c, a: D.UniformReal(lof(c, a), hif(c, a))
        if name == "UnivarGaussian":
            ok, var = self.const(params[0])
            mf = self.expr(args[0], scope)
            if ok:
                var = float(var)
                return lambda c, a: D.Gaussian(mf(c, a), var)
            vf = self.expr(params[0], scope)
            return lambda c, a: D.Gaussian(mf(c, a), vf(c, a))
        raise TypeError(f"unknown distribution {name}")

    # -- classification -----------------------------------------------------

    def classify_tree(self, t, ret: str):
        """Return (domain class, static domain or None, density bound)."""
        leaves = []
        missing_else = False

        def walk(n):
            nonlocal missing_else
            if isinstance(n, A.IfTree):
                walk(n.then)
                if n.orelse is None:
                    missing_else = True
                else:
                    walk(n.orelse)
            else:
                leaves.append(n)
        walk(t)
        names = {l.dist for l in leaves}
        sup = 1.0
        for l in leaves:
            if l.dist == "UnivarGaussian":
                ok, var = self.const(l.params[0])
                sup = max(sup, 1.0 / math.sqrt(2 * math.pi * var) if ok else math.inf)
            elif l.dist == "UniformReal":
                (ok1, lo), (ok2, hi) = self.const(l.params[0]), self.const(l.params[1])
                sup = max(sup, 1.0 / (hi - lo) if ok1 and ok2 else math.inf)
        if names & {"UniformReal", "UnivarGaussian"}:
            return CONTINUOUS, None, sup
        if "Poisson" in names:
            return COUNTABLE, None, sup
        if "UniformChoice" in names:
            return FINITE_PER_WORLD, None, sup
        dom: Dict[object, None] = {}
        for l in leaves:
            if l.dist == "Categorical":
                for k, _ in l.params[0].items:
                    dom[self.const(k)[1]] = None
            elif l.dist == "Bernoulli":
                for v in ((True, False) if ret == "Boolean" else (1, 0)):
                    dom[v] = None
            elif l.dist == "TabularCPD":
                for v in self.type_values(ret):
                    dom[v] = None
                if l.args:
                    dom[None] = None
        if missing_else:
            dom[None] = None
        return FINITE, tuple(dom), sup

    # -- number statements and origin functions -----------------------------

    def groups(self, t: str):
        """Closure ``ctx -> (group values, rates)`` for a generated type with several groups."""
        info = self.tm.types[t]
        unbound = [s for s in info.number_stmts if not s.bindings]
        bound = [s for s in info.number_stmts if s.bindings]
        parts = []
        if unbound:
            f0 = self.tree(unbound[0].tree, {}, "NaturalNum")
            parts.append(("null", f0))
        if bound:
            stmt = bound[0]
            fn, _ = stmt.bindings[0]
            vt = self.tm.functions[fn].ret_type
            f1 = self.tree(stmt.tree, {stmt.bindings[0][1]: 0}, "NaturalNum")
            if self.tm.types[vt].generated:
                nv = number_var(vt)
                objects = self.objects
                parts.append(("gen", (f1, vt, nv, objects)))
            else:
                parts.append(("static", (f1, self.type_values(vt))))

        def compute(c):
            values, lams = [], []
            for kind, data in parts:
                if kind == "null":
                    values.append(None)
                    lams.append(data(c, ()).lam)
                else:
                    f1 = data[0]
                    objs = data[1] if kind == "static" else data[3](data[1], c.get_count(data[2]))
                    for w in objs:
                        values.append(w)
                        lams.append(f1(c, (w,)).lam)
            return tuple(values), tuple(lams)

        trees = [s.tree for s in info.number_stmts]
        if any(_reads_world(tr) for tr in trees):
            return compute
        # rates depend only on the object counts, so results are shared
        counts = [d[2] for k, d in parts if k == "gen"]
        memo = {}

        def rates(c):
            key = tuple(c.get_count(nv) for nv in counts)
            r = memo.get(key)
            if r is None:
                r = memo[key] = compute(c)
            return r
        return rates

    def number_func(self, t: str) -> FuncRuntime:
        info = self.tm.types[t]
        name = "#" + t
        if len(info.number_stmts) == 1 and not info.number_stmts[0].bindings:
            f = self.tree(info.number_stmts[0].tree, {}, "NaturalNum")
            dist = lambda c, a: f(c, ())
        else:
            rates = self.groups(t)

            made = {}

            def dist(c, a):
                _, lams = rates(c)
                d = made.get(lams)
                if d is None:
                    d = made[lams] = D.Poisson(sum(lams))
                return d
        return FuncRuntime(name, "number", "NaturalNum", (), COUNTABLE, None, dist, generated_type=t)

    def origin_func(self, fname: str) -> FuncRuntime:
        fi = self.tm.functions[fname]
        t = fi.arg_types[0]
        info = self.tm.types[t]
        vt = fi.ret_type
        bound = [s for s in info.number_stmts if s.bindings]
        if not bound:
            null = D.NULL_DIST
            dist = lambda c, a: null
            return FuncRuntime(fname, "origin", vt, fi.arg_types, FINITE, (None,), dist)
        rates = self.groups(t)

        made = {}

        def dist(c, a):
            values, lams = rates(c)
            key = (values, lams)
            d = made.get(key)
            if d is None:
                d = D.NULL_DIST if sum(lams) <= 0 else D.Categorical(values, lams)
                made[key] = d
            return d
        if self.tm.types[vt].generated:
            return FuncRuntime(fname, "origin", vt, fi.arg_types, FINITE_PER_WORLD, None, dist)
        dom = self.type_values(vt)
        if any(not s.bindings for s in info.number_stmts):
            dom = (None,) + dom
        return FuncRuntime(fname, "origin", vt, fi.arg_types, FINITE, dom, dist)

    def run(self) -> Model:
        tm = self.tm
        functions: Dict[str, FuncRuntime] = {}
        for fi in tm.functions.values():
            if fi.kind == "origin":
                functions[fi.name] = self.origin_func(fi.name)
                continue
            scope = {p: i for i, p in enumerate(fi.params)}
            cls, dom, sup = self.classify_tree(fi.tree, fi.ret_type)
            dist = self.tree(fi.tree, scope, fi.ret_type)
            functions[fi.name] = FuncRuntime(fi.name, "random", fi.ret_type, fi.arg_types,
                                             cls, dom, dist, sup)
        generated = tuple(t for t, info in tm.types.items() if info.generated)
        for t in generated:
            functions["#" + t] = self.number_func(t)

        evidence: Dict[Var, object] = {}
        for ev in tm.evidence:
            args = tuple(self.const(a)[1] for a in ev.args)
            evidence[Var(ev.func, args)] = self.const(ev.value)[1]
        for t, syms in tm.set_evidence.items():
            evidence[number_var(t)] = len(syms)

        queries = []
        for q in tm.queries:
            f = self.expr(q.term, {})
            queries.append(QueryRuntime(q.text, q.type, (lambda f: lambda c: f(c, ()))(f),
                                        numeric_mean_only=(q.type == "Real")))

        schema = []
        for t in generated:
            for fn in tm.types[t].origin_funcs:
                schema.append((fn, t, tm.functions[fn].ret_type))
        ev_origin = frozenset(fn for t in tm.set_evidence for fn in tm.types[t].origin_funcs)
        return Model(tm, functions, evidence, dict(tm.set_evidence), self.symbol_objects,
                     queries, schema, tm.may_switch, generated, ev_origin)


def _reads_world(node) -> bool:
    """Does an expression or tree read any random variable or object count?"""
    if isinstance(node, (A.Call, A.SetOf)):
        return True
    if isinstance(node, tuple):
        return any(_reads_world(x) for x in node)
    if dataclasses.is_dataclass(node):
        return any(_reads_world(getattr(node, f.name)) for f in dataclasses.fields(node)
                   if f.name != "loc")
    return False


def lower(tm: TypedModel) -> Model:
    return _Lowering(tm).run()
