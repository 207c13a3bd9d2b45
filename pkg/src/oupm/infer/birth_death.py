"""Birth and death moves on the number variables of generated types.

A birth adds object n+1 to a type with n objects; a death removes object n
when no variable takes it as its value.  The new object starts without
attributes: a minimal world only instantiates them once something refers to
the object.  Both moves are chosen with the same probability, so the
acceptance ratio is the world-density ratio corrected by the sampling
density of any variables the move had to instantiate or drop.  See
``docs/birth_death.md`` for the derivation.
"""

from __future__ import annotations

import math
from typing import List

from ..cbn.distributions import NEG_INF
from ..cbn.structure import extend_to_minimal
from ..cbn.values import Obj, Var, number_var
from ..cbn.world import World


def movable_types(world: World) -> List[str]:
    """Generated types whose count variable is instantiated and not observed."""
    ev = world.model.evidence
    out = []
    for t in world.model.generated_types:
        nv = number_var(t)
        if nv in world.values and nv not in ev:
            out.append(t)
    return out


def _count_logp(world: World, nv: Var, n: int) -> float:
    return world.traces[nv].dist.logpdf(n)


def propose_birth(world: World, t: str, rng):
    """Returns (new world, log forward-extension density)."""
    nv = number_var(t)
    new = world.copy()
    new.set_value(nv, world.values[nv] + 1)
    ext = extend_to_minimal(new, rng)
    return new, ext


def propose_death(world: World, t: str, rng):
    """Returns (new world, log density of variables the reverse birth must resample,
    log density of variables this death had to instantiate), or None if object n
    has dependents."""
    nv = number_var(t)
    n = world.values[nv]
    if n == 0 or world.objrefs.get(Obj(t, n)):
        return None
    new = world.copy()
    new.set_value(nv, n - 1)
    ext = extend_to_minimal(new, rng)
    dropped = 0.0
    for v in world.values:
        if v not in new.values:
            dropped += world.var_logp(v)
    return new, dropped, ext


def birth_death_move(state, relaxed: bool = False) -> bool:
    """Attempt one birth or death; returns whether the world changed.

    With ``relaxed`` the ratio only involves the count variable's own
    density, ignoring every variable that depends on the count.
    """
    world = state.world
    rng = state.rng
    types = movable_types(world)
    if not types:
        return False
    t = types[int(rng.random() * len(types))]
    birth = rng.random() < 0.5
    nv = number_var(t)
    n = world.values[nv]
    if birth:
        new, ext = propose_birth(world, t, rng)
        if new.objrefs.get(Obj(t, n + 1)):
            return False    # the extension referred to the newborn: no reverse death
        back = 0.0
        n_new = n + 1
    else:
        res = propose_death(world, t, rng)
        if res is None:
            return False
        new, back, ext = res
        n_new = n - 1
    lp_new = new.log_prob()
    types_new = movable_types(new)
    if lp_new == NEG_INF or t not in types_new:
        return False
    if relaxed:
        la = _count_logp(new, nv, n_new) - _count_logp(world, nv, n)
    else:
        la = lp_new - world.log_prob() + back - ext
        la += math.log(len(types)) - math.log(len(types_new))
    if la >= 0.0 or rng.random() < math.exp(la):
        state.world = new
        return True
    return False
