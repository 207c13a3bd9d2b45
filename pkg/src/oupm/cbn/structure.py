"""Graph structure of a partial world: children, switching parents,
contingent edges, core sets, minimality and extension."""

from __future__ import annotations

from typing import Callable, Dict, Optional, Set, Tuple

from ..dsl.lower import FINITE, FINITE_PER_WORLD
from ..errors import ContractViolation, ModelRuntimeError
from .values import Var
from .world import World


def eval_tree(world: World, x: Var):
    """Trace of ``x`` in ``world``; ``("unsupported", var)`` at the first missing reference."""
    tr, missing = world.try_eval(x)
    if tr is None:
        return ("unsupported", missing)
    return tr


def supports(world: World, x: Var) -> bool:
    return world.supports(x)


def children(world: World, x: Var) -> Tuple[Var, ...]:
    """Variables whose trace references ``x`` (query pseudo-nodes excluded)."""
    return tuple(c for c in world.children.get(x, ()) if not c.is_query)


def is_switching_parent(world: World, x: Var, y: Var) -> bool:
    return x in world.traces[y].guards


def is_switching_var(world: World, x: Var) -> bool:
    traces = world.traces
    return any(x in traces[c].guards for c in world.children.get(x, ()))


def is_edge_contingent(world: World, z: Var, y: Var, x: Var) -> bool:
    """Is the edge y -> z contingent on x?

    It is when z's trace references x before y and x is a pivot of that
    trace, i.e. its value can change which variables are referenced after
    it.  A parent that only feeds leaf parameters makes no edge contingent.
    """
    tr = world.traces[z]
    refs = tr.refs
    if y not in refs:
        raise ContractViolation(f"{y} is not a parent of {z}")
    if x not in refs or x not in tr.pivots:
        return False
    return refs.index(x) < refs.index(y)


def _core_reach(world: World, x: Var) -> Set[Var]:
    traces = world.traces
    seen = set(world.targets)
    stack = list(world.targets)
    while stack:
        z = stack.pop()
        tr = traces[z]
        refs = tr.refs
        if x in tr.pivots:
            refs = refs[:refs.index(x) + 1]
        for y in refs:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def core(world: World, x: Var) -> Set[Var]:
    """Variables other than ``x`` with a path to the targets avoiding edges contingent on ``x``."""
    reach = _core_reach(world, x)
    values = world.values
    return {v for v in reach if v in values and v != x}


def upsilon(world: World, x: Var, core_set: Optional[Set[Var]] = None) -> Tuple[Var, ...]:
    """Children of ``x`` that lie in its core."""
    if core_set is None:
        core_set = core(world, x)
    return tuple(c for c in children(world, x) if c in core_set)


def finite_domain(world: World, x: Var) -> Optional[Tuple]:
    """Values ``x`` may take, or ``None`` when its domain is infinite or continuous."""
    f = world.model.functions[x.func]
    if f.domain_class == FINITE:
        return f.static_domain
    if f.domain_class == FINITE_PER_WORLD:
        dom = dict.fromkeys(world.traces[x].dist.support())
        return tuple(dom)
    return None


# -- minimality ---------------------------------------------------------------

def needed(world: World) -> Set[Var]:
    """Nodes reachable backwards from the targets."""
    traces = world.traces
    seen = set(world.targets)
    stack = list(world.targets)
    while stack:
        z = stack.pop()
        tr = traces.get(z)
        if tr is None:
            continue
        for y in tr.refs:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def prune(world: World) -> World:
    """Remove, in place, every variable without a path to the targets."""
    keep = needed(world)
    drop = [v for v in world.values if v not in keep]
    for v in drop:
        world.remove(v)
    for v in drop:
        world.children.pop(v, None)
    return world


def extend_to_minimal(world: World, rng, choose: Optional[Callable] = None,
                      prune_after: bool = True) -> float:
    """Instantiate missing parents until the world is self-supporting, then prune.

    New variables are sampled from their parent-conditional distributions
    (or chosen by ``choose(var, dist, rng)``), parents before children.
    Returns the summed log-probability of the sampled values.
    """
    logq = 0.0
    waiting = world.waiting
    values = world.values
    while waiting:
        stack = [next(iter(waiting))]
        on_stack = {stack[0]}
        while stack:
            top = stack[-1]
            if top in values:
                stack.pop()
                on_stack.discard(top)
                continue
            tr, missing = world.try_eval(top)
            if tr is None:
                if missing in on_stack:
                    raise ModelRuntimeError(f"cyclic dependency through {missing}")
                stack.append(missing)
                on_stack.add(missing)
                continue
            dist = tr.dist
            v = dist.sample(rng) if choose is None else choose(top, dist, rng)
            logq += dist.logpdf(v)
            world.install(top, tr, v)
            stack.pop()
            on_stack.discard(top)
    if prune_after:
        prune(world)
    return logq


# -- invariant checks ----------------------------------------------------------

def is_self_supporting(world: World) -> bool:
    if world.pending or world.waiting:
        return False
    values = world.values
    for node in list(values) + [t for t in world.targets if t.is_query]:
        tr = world.traces.get(node)
        if tr is None or any(r not in values for r in tr.refs):
            return False
    return True


def is_minimal(world: World) -> bool:
    keep = needed(world)
    return all(v in keep for v in world.values)


def check_world(world: World) -> None:
    """Assert the structural invariants: traces fresh, children index inverse of refs,
    self-supporting, minimal and evidence-consistent."""
    if not is_self_supporting(world):
        raise ContractViolation("world is not self-supporting")
    if not is_minimal(world):
        raise ContractViolation("world is not minimal")
    for var, val in world.model.evidence.items():
        if world.values.get(var, object()) != val:
            raise ContractViolation(f"evidence {var} not held")
    nodes = list(world.values) + [t for t in world.targets if t.is_query]
    expect: Dict[Var, Dict[Var, None]] = {}
    for node in nodes:
        fresh, _ = world.try_eval(node)
        old = world.traces[node]
        if fresh.refs != old.refs or set(fresh.guards) != set(old.guards) \
                or set(fresh.pivots) != set(old.pivots) or repr(fresh.dist) != repr(old.dist) \
                or (node.is_query and fresh.value != old.value):
            raise ContractViolation(f"stale trace for {node}")
        for p in old.refs:
            expect.setdefault(p, {})[node] = None
    got = {k: set(v) for k, v in world.children.items() if v}
    if got != {k: set(v) for k, v in expect.items()}:
        raise ContractViolation("children index out of sync")
    if set(world.traces) != set(nodes):
        raise ContractViolation("traces for uninstantiated nodes")
