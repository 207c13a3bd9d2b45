"""Exact inference by enumerating minimal self-supporting worlds.

Enumeration starts from the world holding only the evidence and repeatedly
branches on a variable some node is waiting for, over every value of that
variable's distribution.  Because a variable is only instantiated when
something needs it, every completed branch is a minimal world and no world
is produced twice.  Poisson counts are truncated; the probability of the
cut branches is bounded and reported.

Generated objects nothing refers to yet are interchangeable, so a branch
over such objects keeps only the lowest-indexed one and records how many
labelled worlds it stands for (its multiplicity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple, Union

from scipy.stats import poisson

from .cbn.distributions import NEG_INF, Poisson
from .cbn.values import Obj, Var, fmt
from .cbn.world import World
from .dsl.lower import Model
from .errors import ContractViolation, OracleLimitation

DEFAULT_TAIL = 1e-8


@dataclass
class WorldDist:
    """Exact posterior over minimal worlds.

    ``worlds`` holds ``(world, probability, multiplicity)``: the probability
    of one labelled world and the number of labelled worlds that differ from
    it only by renaming unreferenced generated objects.  Probabilities are
    normalized by the enumerated mass plus ``truncation_bound``'s unnormalized
    counterpart, so ``sum(p * m) + truncation_bound == 1``.
    """
    model: Model
    worlds: List[Tuple[World, float, int]]
    truncation_bound: float
    log_evidence: float
    marginals: List[Dict[object, float]]
    n_worlds: int

    @property
    def total(self) -> float:
        return sum(p * m for _, p, m in self.worlds)


@dataclass
class Posterior:
    probs: Dict[object, float]
    bound: float
    undefined: float = 0.0

    def __getitem__(self, v) -> float:
        return self.probs.get(v, 0.0)

    def rows(self) -> List[Tuple[str, float]]:
        return sorted(((fmt(v), p) for v, p in self.probs.items()), key=lambda r: r[0])


class _Enumerator:
    def __init__(self, model: Model, trunc: Optional[int], tail: float, keep_worlds: bool):
        self.model = model
        self.trunc = trunc
        self.tail = tail
        self.keep = keep_worlds
        self.found: List[Tuple[World, float, int]] = []
        self.masses: List[Dict[object, float]] = [dict() for _ in model.queries]
        self.cut = 0.0
        self.mass = 0.0
        self.count = 0
        self.sup = {v: max(1.0, model.functions[v.func].sup_density) for v in model.evidence}

    # ------------------------------------------------------------------

    def run(self) -> None:
        w = World.seeded(self.model)
        self.expand(w, 0.0, 1)

    def evidence_terms(self, w: World) -> Tuple[float, float]:
        """(log density of evidence with a trace, bound on the rest)."""
        lp = 0.0
        rest = 1.0
        for var in self.model.evidence:
            tr = w.traces.get(var)
            if tr is None:
                rest *= self.sup[var]
            else:
                lp += tr.dist.logpdf(w.values[var])
        return lp, rest

    def expand(self, w: World, lp_latent: float, mult: int) -> None:
        lp_ev, rest = self.evidence_terms(w)
        if lp_ev == NEG_INF:
            return
        if not w.waiting:
            lp = lp_latent + lp_ev
            p = math.exp(lp)
            self.count += 1
            self.mass += p * mult
            for i, v in enumerate(w.query_values()):
                d = self.masses[i]
                d[v] = d.get(v, 0.0) + p * mult
            if self.keep:
                self.found.append((w, lp, mult))
            return
        var, tr = self.next_var(w)
        dist = tr.dist
        if not dist.discrete:
            raise OracleLimitation(f"{var} is continuous and unobserved")
        if isinstance(dist, Poisson):
            k = self.trunc if self.trunc is not None else self.auto_k(dist.lam)
            tail = float(poisson.sf(k, dist.lam)) if dist.lam > 0 else 0.0
            self.cut += math.exp(lp_latent + lp_ev) * rest * tail * mult
            branches = [(n, 1) for n in range(k + 1)]
        else:
            support = dist.support()
            if support is None:
                raise OracleLimitation(f"{var} has an infinite domain")
            branches = self.collapse(w, dist, support)
        for v, m in branches:
            lq = dist.logpdf(v)
            if lq == NEG_INF:
                continue
            w2 = w.copy()
            w2.install(var, tr, v)
            self.expand(w2, lp_latent + lq, mult * m)

    def auto_k(self, lam: float) -> int:
        k = int(lam)
        while poisson.sf(k, lam) >= self.tail:
            k += 1
        return k

    @staticmethod
    def next_var(w: World):
        """A variable some node is waiting for, descending to one whose own
        parents are all instantiated."""
        var = next(iter(w.waiting))
        seen = {var}
        while True:
            tr, missing = w.try_eval(var)
            if tr is not None:
                return var, tr
            if missing in seen:
                raise ContractViolation(f"cyclic dependency through {missing}")
            seen.add(missing)
            var = missing

    @staticmethod
    def touched(w: World) -> Set[Obj]:
        out: Set[Obj] = set(w.objrefs)
        for group in (w.values, w.pending, w.waiting):
            for v in group:
                for a in v.args:
                    if type(a) is Obj:
                        out.add(a)
        return out

    def collapse(self, w: World, dist, support) -> List[Tuple[object, int]]:
        """Distinct support values, with unreferenced generated objects of equal
        mass merged into their lowest-indexed representative."""
        touched = None
        seen = set()
        out = []
        rep: Dict[Tuple[str, float], int] = {}
        for v in support:
            key = (type(v), v)
            if key in seen:
                continue
            seen.add(key)
            if type(v) is Obj and v.generated:
                if touched is None:
                    touched = self.touched(w)
                if v not in touched:
                    g = (v.type, dist.logpdf(v))
                    i = rep.get(g)
                    if i is None:
                        rep[g] = len(out)
                        out.append((v, 1))
                    else:
                        out[i] = (out[i][0], out[i][1] + 1)
                    continue
            out.append((v, 1))
        return out


def enumerate_worlds(model: Model, trunc: Optional[int] = None, tail: float = DEFAULT_TAIL,
                     keep_worlds: bool = True) -> WorldDist:
    """Enumerate every minimal world consistent with the evidence.

    ``trunc`` caps every Poisson count; by default each cap is the smallest
    giving tail mass below ``tail``.  With ``keep_worlds=False`` only the
    query marginals are kept.
    """
    e = _Enumerator(model, trunc, tail, keep_worlds)
    e.run()
    if e.mass <= 0.0:
        raise ContractViolation("evidence has probability zero")
    norm = e.mass + e.cut
    worlds = [(w, math.exp(lp) / norm, m) for w, lp, m in e.found]
    marg = [{v: p / norm for v, p in d.items()} for d in e.masses]
    return WorldDist(model, worlds, e.cut / norm, math.log(e.mass), marg, e.count)


def exact_posterior(dist: WorldDist, query: Union[int, str, Var]) -> Posterior:
    """Posterior of a query (by index or text) or of a ground variable.

    A ground variable that some world does not instantiate puts that world's
    mass in the ``undefined`` bucket.  Every probability carries the
    truncation bound as its error radius.
    """
    model = dist.model
    if isinstance(query, str):
        texts = [q.text for q in model.queries]
        if query not in texts:
            raise ContractViolation(f"no query {query!r}")
        query = texts.index(query)
    if isinstance(query, int):
        return Posterior(dict(dist.marginals[query]), dist.truncation_bound)
    if not dist.worlds and dist.n_worlds:
        raise ContractViolation("worlds were not kept")
    probs: Dict[object, float] = {}
    undefined = 0.0
    for w, p, m in dist.worlds:
        if query in w.values:
            v = w.values[query]
            probs[v] = probs.get(v, 0.0) + p * m
        else:
            undefined += p * m
    return Posterior(probs, dist.truncation_bound, undefined)


def naive_transition_ratio(world: World, new: World, x: Var) -> float:
    """Acceptance probability of ``world -> new`` from the full world densities
    and the proposal probabilities in both directions."""
    from .infer.mh import proposal_logprob
    fwd = proposal_logprob(world, new, x)
    back = proposal_logprob(new, world, x)
    lr = new.log_prob() + back - world.log_prob() - fwd
    return math.exp(min(0.0, lr))


def reachable_worlds(start: World, rng=None, limit: int = 100000) -> Set[frozenset]:
    """Keys of every feasible world reachable from ``start`` by single-variable
    resampling moves, exploring each variable's whole finite domain."""
    from .cbn.structure import finite_domain
    seen = {start.key()}
    frontier = [start]
    while frontier:
        w = frontier.pop()
        for x in w.latent_vars():
            dom = finite_domain(w, x)
            if dom is None:
                raise OracleLimitation(f"{x} has an infinite domain")
            for v in dom:
                if w.traces[x].dist.logpdf(v) == NEG_INF:
                    continue
                for nw in _all_extensions(w, x, v):
                    if nw.log_prob() == NEG_INF:
                        continue
                    k = nw.key()
                    if k not in seen:
                        seen.add(k)
                        if len(seen) > limit:
                            raise OracleLimitation("reachable set too large")
                        frontier.append(nw)
    return seen


def _all_extensions(world: World, x: Var, value) -> List[World]:
    """Every distinct minimal world obtainable by setting ``x`` and extending.

    Variables instantiated on the way may be pruned again, so different
    branches can end in the same world; each world is returned once."""
    from .cbn.structure import prune
    w = world.copy()
    w.set_value(x, value)
    out = []
    keys = set()
    stack = [w]
    while stack:
        cur = stack.pop()
        if not cur.waiting:
            prune(cur)
            k = cur.key()
            if k not in keys:
                keys.add(k)
                out.append(cur)
            continue
        var, tr = _Enumerator.next_var(cur)
        support = tr.dist.support()
        if support is None:
            raise OracleLimitation(f"{var} has an infinite domain")
        for v in dict.fromkeys(support):
            if tr.dist.logpdf(v) == NEG_INF:
                continue
            nw = cur.copy()
            nw.install(var, tr, v)
            stack.append(nw)
    return out

