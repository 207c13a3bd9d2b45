"""Parent-conditional Metropolis-Hastings over minimal partial worlds."""

from __future__ import annotations

import math

from ..cbn.distributions import NEG_INF
from ..cbn.structure import children, extend_to_minimal
from ..cbn.values import Var
from ..cbn.world import World
from ..errors import ContractViolation


def propose(world: World, x: Var, rng):
    """Resample ``x`` from its parent-conditional prior and repair the world.

    Returns the proposed world (``world`` itself is untouched).
    """
    v = world.traces[x].dist.sample(rng)
    new = world.copy()
    new.set_value(x, v)
    extend_to_minimal(new, rng)
    return new


def reachable(world: World, new: World, x: Var) -> bool:
    """Can ``new`` be proposed from ``world`` by resampling ``x``?"""
    if x not in world.values or x not in new.values:
        return False
    a, b = world.values, new.values
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    for v, val in small.items():
        if v != x and v in large and large[v] != val:
            return False
    return True


def _check(world, new, x):
    if not reachable(world, new, x):
        raise ContractViolation(f"world is not reachable by resampling {x}")


def proposal_logprob(world: World, new: World, x: Var) -> float:
    """Log probability that resampling ``x`` in ``world`` produces ``new``."""
    _check(world, new, x)
    V = world.latent_count()
    lp = -math.log(V) + world.traces[x].dist.logpdf(new.values[x])
    old = world.values
    for v in new.values:
        if v not in old:
            lp += new.var_logp(v)
    return lp


def acceptance_log_ratio(world: World, new: World, x: Var) -> float:
    """Log acceptance probability in its reduced form: the ratio of |V| sizes
    times the density ratio of the children of ``x`` present in both worlds."""
    _check(world, new, x)
    lr = math.log(world.latent_count()) - math.log(new.latent_count())
    for y in children(world, x):
        if y in new.values and x in new.traces[y].refs:
            a = new.var_logp(y)
            if a == NEG_INF:
                return NEG_INF
            lr += a - world.var_logp(y)
    return min(0.0, lr)


def acceptance_ratio(world: World, new: World, x: Var) -> float:
    return math.exp(acceptance_log_ratio(world, new, x))


def mh_move(state, x: Var) -> bool:
    """One parent-conditional MH update of ``x``; returns whether it was accepted."""
    world = state.world
    new = propose(world, x, state.rng)
    la = acceptance_log_ratio(world, new, x)
    if la >= 0.0 or state.rng.random() < math.exp(la):
        state.world = new
        return True
    return False
