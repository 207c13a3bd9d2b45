"""Gibbs updates of finite-domain variables in partial worlds.

Candidate worlds keep only the core of the sampled variable (the part of
the world guaranteed to survive any change of its value), set the new
value and re-extend.  Each candidate is weighted by the prior of the new
value over the number of latent variables, times the densities of the
children that lie in the core.
"""

from __future__ import annotations

import math
from typing import List, Set, Tuple

from ..cbn.distributions import NEG_INF
from ..cbn.structure import children, core, extend_to_minimal, finite_domain, prune, upsilon
from ..cbn.values import Var
from ..cbn.world import World
from ..errors import ContractViolation


def gibbs_log_weight(cand: World, x: Var, ups) -> float:
    """Log weight of a candidate world for variable ``x`` given the core children ``ups``."""
    lw = _density_terms(cand, x, ups)
    if lw == NEG_INF:
        return NEG_INF
    return lw - math.log(cand.latent_count())


def gibbs_weight(cand: World, x: Var, ups) -> float:
    return math.exp(gibbs_log_weight(cand, x, ups))


def restrict(world: World, keep: Set[Var], x: Var, value) -> World:
    """Copy of ``world`` holding only ``keep`` and ``x``, with ``x = value``.

    Nodes whose traces touched a dropped variable also reference ``x`` (that
    is what excludes the variable from the core), so re-evaluating the
    children of ``x`` repairs every trace; some may be left pending.
    """
    w = world.copy()
    drop = [v for v in w.values if v not in keep and v != x]
    for v in drop:
        w.remove(v)
    for v in drop:
        w.children.pop(v, None)
    w.set_value(x, value)
    return w


def _distinct(dom) -> list:
    out = []
    for v in dom:
        if not any(v == u and type(v) is type(u) for u in out):
            out.append(v)
    return out


def gibbs_candidates(world: World, x: Var, rng, block: bool = True) -> List[Tuple[object, World, float]]:
    """Candidate worlds for every value of ``x`` with positive prior mass,
    with their log weights.  The current value maps to ``world`` itself."""
    dom = finite_domain(world, x)
    if dom is None:
        raise ContractViolation(f"{x} has no finite domain")
    cur = world.values[x]
    prior = world.traces[x].dist
    if block:
        core_set = core(world, x)
        ups = upsilon(world, x, core_set)
    else:
        ups = children(world, x)
    out = []
    for v in _distinct(dom):
        if v == cur and type(v) is type(cur):
            out.append((v, world, gibbs_log_weight(world, x, ups)))
            continue
        if prior.logpdf(v) == NEG_INF:
            continue
        if block:
            cand = restrict(world, core_set, x, v)
            # the core stays needed whatever x is, so no pruning is required
            extend_to_minimal(cand, rng, prune_after=False)
            out.append((v, cand, gibbs_log_weight(cand, x, ups)))
        else:
            cand = world.copy()
            cand.set_value(x, v)
            extend_to_minimal(cand, rng, prune_after=False)
            # child densities are read before pruning so pinned variables count
            lw = _density_terms(cand, x, ups)
            prune(cand)
            if lw != NEG_INF:
                lw -= math.log(cand.latent_count())
            out.append((v, cand, lw))
    return out


def _density_terms(cand: World, x: Var, ups) -> float:
    lw = cand.var_logp(x)
    for y in ups:
        if lw == NEG_INF:
            break
        lw += cand.var_logp(y)
    return lw


def select(cands, rng) -> int:
    lws = [c[2] for c in cands]
    top = max(lws)
    if top == NEG_INF:
        raise ContractViolation("every Gibbs candidate has zero weight")
    ws = [math.exp(l - top) for l in lws]
    u = rng.random() * sum(ws)
    acc = 0.0
    for i, w in enumerate(ws):
        acc += w
        if u < acc and w > 0.0:
            return i
    return max(i for i, w in enumerate(ws) if w > 0.0)


def gibbs_move(state, x: Var, block: bool = True) -> bool:
    """Install a candidate world drawn in proportion to its weight.

    Returns True when the installed world differs from the current one."""
    cands = gibbs_candidates(state.world, x, state.rng, block)
    j = select(cands, state.rng)
    new = cands[j][1]
    changed = new is not state.world
    state.world = new
    return changed
