"""Partial worlds: assignments with cached evaluation traces and a children index."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from ..dsl.lower import EvalCtx, Missing, Model
from ..errors import ContractViolation, ModelRuntimeError
from .distributions import NEG_INF
from .values import Obj, Var, fmt, query_node


class Trace:
    """Result of evaluating one node's dependency tree.

    ``refs`` lists variables in order of first reference, ``guards`` those
    referenced inside a guard and ``pivots`` those whose value can change
    which variables are referenced later (guards, call arguments, object
    counts).  Variables carry their leaf distribution in ``dist``; query
    nodes carry the query's value in ``value``.
    """
    __slots__ = ("refs", "guards", "pivots", "dist", "value")

    def __init__(self, refs: Tuple[Var, ...], guards: Tuple[Var, ...], dist, value=None,
                 pivots: Tuple[Var, ...] = ()):
        self.refs = refs
        self.guards = guards
        self.pivots = pivots
        self.dist = dist
        self.value = value

    def __repr__(self):
        return f"Trace(refs={[str(r) for r in self.refs]}, dist={self.dist!r})"


def targets_of(model: Model) -> Tuple[Var, ...]:
    return tuple(model.evidence) + tuple(query_node(i) for i in range(len(model.queries)))


class World:
    """A finite instantiation of ground variables.

    ``waiting`` and ``pending`` are only non-empty while a world is being
    extended: ``pending[node]`` is the first missing variable of an
    unsupported node and ``waiting[var]`` the nodes blocked on ``var``.
    """
    __slots__ = ("model", "targets", "values", "traces", "children", "waiting",
                 "pending", "objrefs", "inverse", "_schema")

    def __init__(self, model: Model, targets: Optional[Tuple[Var, ...]] = None):
        self.model = model
        self.targets = targets if targets is not None else targets_of(model)
        self.values: Dict[Var, object] = {}
        self.traces: Dict[Var, Trace] = {}
        self.children: Dict[Var, Dict[Var, None]] = {}
        self.waiting: Dict[Var, Dict[Var, None]] = {}
        self.pending: Dict[Var, Var] = {}
        self.objrefs: Dict[Obj, int] = {}
        self.inverse: Dict[Tuple[str, object], Dict[Obj, None]] = {}
        self._schema = frozenset(fn for fn, _, _ in model.schema)

    # -- construction -------------------------------------------------------

    @classmethod
    def seeded(cls, model: Model) -> "World":
        """Evidence assigned and every target evaluated; missing parents left pending."""
        w = cls(model)
        for var, val in model.evidence.items():
            w.values[var] = val
            w._index_value(var, val, +1)
        for node in w.targets:
            w.evaluate(node)
        return w

    @classmethod
    def from_assignment(cls, model: Model, assignment: Dict[Var, object]) -> "World":
        """World holding the evidence plus ``assignment``, with every trace evaluated.

        Nodes that are not supported are left pending.
        """
        w = cls(model)
        for var, val in list(model.evidence.items()) + list(assignment.items()):
            if var in w.values:
                w._index_value(var, w.values[var], -1)
            w.values[var] = val
            w._index_value(var, val, +1)
        for node in list(w.values) + [t for t in w.targets if t.is_query]:
            w.evaluate(node)
        return w

    def copy(self) -> "World":
        w = World.__new__(World)
        w.model = self.model
        w.targets = self.targets
        w._schema = self._schema
        w.values = dict(self.values)
        w.traces = dict(self.traces)
        w.children = {k: dict(v) for k, v in self.children.items()}
        w.waiting = {k: dict(v) for k, v in self.waiting.items()}
        w.pending = dict(self.pending)
        w.objrefs = dict(self.objrefs)
        w.inverse = {k: dict(v) for k, v in self.inverse.items()}
        return w

    # -- evaluation ---------------------------------------------------------

    def try_eval(self, node: Var):
        """Evaluate without side effects.  Returns ``(trace, None)`` or ``(None, missing)``."""
        ctx = EvalCtx(self.values)
        try:
            out = self.model.evaluate(ctx, node)
        except Missing as m:
            return None, m.var
        except RecursionError:
            raise ModelRuntimeError(f"evaluation of {node} recursed too deeply") from None
        if node.is_query:
            return Trace(tuple(ctx.refs), tuple(ctx.guards), None, out, tuple(ctx.pivots)), None
        return Trace(tuple(ctx.refs), tuple(ctx.guards), out, None, tuple(ctx.pivots)), None

    def _link(self, node: Var, tr: Trace) -> None:
        ch = self.children
        for p in tr.refs:
            d = ch.get(p)
            if d is None:
                ch[p] = {node: None}
            else:
                d[node] = None

    def _unlink(self, node: Var, tr: Trace) -> None:
        ch = self.children
        for p in tr.refs:
            d = ch.get(p)
            if d is not None:
                d.pop(node, None)
                if not d:
                    del ch[p]

    def _unwait(self, node: Var) -> None:
        m = self.pending.pop(node, None)
        if m is not None:
            w = self.waiting.get(m)
            if w is not None:
                w.pop(node, None)
                if not w:
                    del self.waiting[m]

    def evaluate(self, node: Var) -> Optional[Trace]:
        """(Re)compute a node's trace, recording it as pending when unsupported."""
        old = self.traces.pop(node, None)
        if old is not None:
            self._unlink(node, old)
        self._unwait(node)
        tr, missing = self.try_eval(node)
        if tr is not None:
            self.traces[node] = tr
            self._link(node, tr)
        else:
            self.pending[node] = missing
            w = self.waiting.get(missing)
            if w is None:
                self.waiting[missing] = {node: None}
            else:
                w[node] = None
        return tr

    def _index_value(self, var: Var, value, sign: int) -> None:
        if type(value) is Obj and value.generated:
            n = self.objrefs.get(value, 0) + sign
            if n:
                self.objrefs[value] = n
            else:
                del self.objrefs[value]
        if var.func in self._schema:
            key = (var.func, value)
            if sign > 0:
                self.inverse.setdefault(key, {})[var.args[0]] = None
            else:
                d = self.inverse.get(key)
                if d is not None:
                    d.pop(var.args[0], None)
                    if not d:
                        del self.inverse[key]

    def install(self, var: Var, trace: Trace, value) -> None:
        """Add a new variable with a precomputed trace, waking nodes blocked on it."""
        self.values[var] = value
        self._index_value(var, value, +1)
        self.traces[var] = trace
        self._link(var, trace)
        self._unwait(var)
        blocked = self.waiting.pop(var, None)
        if blocked:
            for node in blocked:
                self.pending.pop(node, None)
            for node in blocked:
                self.evaluate(node)

    def set_value(self, var: Var, value) -> None:
        """Change an assigned variable and re-evaluate its children."""
        old = self.values[var]
        self._index_value(var, old, -1)
        self.values[var] = value
        self._index_value(var, value, +1)
        kids = self.children.get(var)
        if kids:
            for node in list(kids):
                self.evaluate(node)

    def remove(self, var: Var) -> None:
        value = self.values.pop(var)
        self._index_value(var, value, -1)
        tr = self.traces.pop(var, None)
        if tr is not None:
            self._unlink(var, tr)
        self._unwait(var)

    # -- queries ------------------------------------------------------------

    def var_logp(self, var: Var) -> float:
        tr = self.traces.get(var)
        if tr is None:
            raise ContractViolation(f"{var} is not supported")
        return tr.dist.logpdf(self.values[var])

    def log_prob(self) -> float:
        """Log density of the world: sum of every variable's conditional log density."""
        if self.pending:
            raise ContractViolation("world is not self-supporting")
        total = 0.0
        traces = self.traces
        for var, val in self.values.items():
            tr = traces.get(var)
            if tr is None:
                raise ContractViolation(f"{var} is not supported")
            lp = tr.dist.logpdf(val)
            if lp == NEG_INF:
                return NEG_INF
            total += lp
        return total

    def latent_vars(self) -> List[Var]:
        """V(sigma): instantiated non-evidence variables, in instantiation order."""
        ev = self.model.evidence
        return [v for v in self.values if v not in ev]

    def latent_count(self) -> int:
        """|V(sigma)|; evidence is always instantiated."""
        return len(self.values) - len(self.model.evidence)

    def query_values(self) -> List[object]:
        return [self.traces[t].value for t in self.targets if t.is_query]

    def supports(self, node: Var) -> bool:
        tr, _ = self.try_eval(node)
        return tr is not None

    def assignment(self) -> Dict[Var, object]:
        return dict(self.values)

    def key(self) -> frozenset:
        """Hashable identity of the assignment."""
        return frozenset(self.values.items())

    def dump(self) -> str:
        return "\n".join(sorted(f"{v} = {fmt(x)}" for v, x in self.values.items()))

    def __repr__(self):
        return "World[" + ", ".join(f"{v}={fmt(x)}" for v, x in self.values.items()) + "]"

    def __len__(self):
        return len(self.values)

    def __contains__(self, var) -> bool:
        return var in self.values

    def __getitem__(self, var):
        return self.values[var]
