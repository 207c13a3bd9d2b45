"""Chain orchestration: initialization, the move mixture and query statistics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..cbn.distributions import NEG_INF
from ..cbn.structure import check_world, extend_to_minimal, finite_domain
from ..cbn.values import fmt
from ..cbn.world import World
from ..dsl.lower import Model
from ..errors import ContractViolation, InitializationError, ModelRuntimeError
from .birth_death import birth_death_move
from .config import SamplerConfig
from .gibbs import gibbs_move
from .mh import mh_move


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream for one chain; ``SeedSequence`` makes streams for distinct seeds independent."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


class QueryEstimate:
    """Running statistics for one query.

    Finite-valued queries keep a frequency per value; every numeric value
    also feeds the running mean.  Real-valued queries keep only the mean.
    """

    def __init__(self, text: str, mean_only: bool = False):
        self.text = text
        self.mean_only = mean_only
        self.counts: Dict[object, int] = {}
        self.count = 0
        self.numeric = 0
        self.total = 0.0

    def add(self, value) -> None:
        self.count += 1
        if not self.mean_only:
            self.counts[value] = self.counts.get(value, 0) + 1
        if type(value) in (int, float):
            self.numeric += 1
            self.total += value

    def frequencies(self) -> Dict[object, float]:
        if not self.count:
            return {}
        return {v: c / self.count for v, c in self.counts.items()}

    def probability(self, value) -> float:
        if not self.count:
            return math.nan
        return self.counts.get(value, 0) / self.count

    @property
    def mean(self) -> float:
        return self.total / self.numeric if self.numeric else math.nan

    def rows(self) -> List[Tuple[str, str]]:
        """(value, estimate) pairs in a stable order, for reporting."""
        if not self.count:
            return [("", "no samples")]
        if self.mean_only:
            return [("mean", repr(self.mean))]
        items = sorted(self.counts.items(), key=lambda kv: fmt(kv[0]))
        return [(fmt(v), repr(c / self.count)) for v, c in items]

    def copy(self) -> "QueryEstimate":
        q = QueryEstimate(self.text, self.mean_only)
        q.counts = dict(self.counts)
        q.count, q.numeric, q.total = self.count, self.numeric, self.total
        return q

    def __repr__(self):
        return f"QueryEstimate({self.text!r}, n={self.count})"


@dataclass
class MoveStats:
    proposed: Dict[str, int] = field(default_factory=dict)
    accepted: Dict[str, int] = field(default_factory=dict)

    def record(self, move: str, ok: bool) -> None:
        self.proposed[move] = self.proposed.get(move, 0) + 1
        if ok:
            self.accepted[move] = self.accepted.get(move, 0) + 1

    def rate(self, move: str) -> float:
        n = self.proposed.get(move, 0)
        return self.accepted.get(move, 0) / n if n else math.nan


@dataclass
class ChainState:
    world: World
    rng: np.random.Generator
    config: SamplerConfig
    step: int = 0
    stats: MoveStats = field(default_factory=MoveStats)


def _init_chooser(model: Model):
    """Origin variables of observed objects start at null when null is possible,
    so every observed object begins unexplained by any generated source."""
    funcs = model.evidence_origin_funcs

    def choose(var, dist, rng):
        if var.func in funcs and dist.logpdf(None) > NEG_INF:
            return None
        return dist.sample(rng)
    return choose


def initial_world(model: Model, rng, max_attempts: int = 10000) -> World:
    """Forward-sample the ancestors of evidence and queries with evidence clamped,
    retrying until the world has positive density."""
    choose = _init_chooser(model)
    reason = "every attempt had zero density"
    for _ in range(max_attempts):
        w = World.seeded(model)
        try:
            extend_to_minimal(w, rng, choose)
        except ModelRuntimeError as e:
            reason = str(e)
            continue
        if w.log_prob() > NEG_INF:
            return w
    raise InitializationError(max_attempts, reason)


def init_chain(model: Model, config: SamplerConfig, rng=None) -> ChainState:
    if rng is None:
        rng = make_rng(config.seed)
    world = initial_world(model, rng, config.max_init_attempts)
    state = ChainState(world, rng, config)
    if config.debug:
        _check(state)
    return state


def _check(state: ChainState) -> None:
    check_world(state.world)
    if state.world.log_prob() == NEG_INF:
        raise ContractViolation(f"infeasible world after step {state.step}")


def step(state: ChainState) -> None:
    """One step of the move mixture."""
    cfg = state.config
    world = state.world
    rng = state.rng
    if world.model.generated_types and rng.random() < cfg.birth_death_rate:
        relaxed = state.step < cfg.init_phase
        ok = birth_death_move(state, relaxed)
        state.stats.record("birth-death-init" if relaxed else "birth-death", ok)
    else:
        latent = world.latent_vars()
        if latent:
            x = latent[int(rng.random() * len(latent))]
            if cfg.kind != "parent-mh" and finite_domain(world, x) is not None:
                ok = gibbs_move(state, x, block=(cfg.kind == "gibbs"))
                state.stats.record("gibbs", ok)
            else:
                ok = mh_move(state, x)
                state.stats.record("mh", ok)
    state.step += 1
    if cfg.debug:
        _check(state)


@dataclass
class RunResult:
    estimates: List[QueryEstimate]
    checkpoints: List[Tuple[int, float, List[QueryEstimate]]]
    stats: MoveStats
    world: World


def run(model: Model, config: SamplerConfig, checkpoints: Optional[Sequence[int]] = None) -> RunResult:
    """Run one chain; statistics are collected at every step after
    ``config.stats_start``.  ``checkpoints`` are step counts at which a copy
    of the estimates is kept, with the elapsed wall-clock time."""
    t0 = time.perf_counter()
    state = init_chain(model, config)
    ests = [QueryEstimate(q.text, q.numeric_mean_only) for q in model.queries]
    marks = sorted(set(c for c in (checkpoints or ()) if 0 <= c <= config.steps))
    snaps = []
    mi = 0
    while mi < len(marks) and marks[mi] == 0:
        snaps.append((0, time.perf_counter() - t0, [e.copy() for e in ests]))
        mi += 1
    start = config.stats_start
    for t in range(1, config.steps + 1):
        step(state)
        if t > start:
            for e, v in zip(ests, state.world.query_values()):
                e.add(v)
        if mi < len(marks) and marks[mi] == t:
            snaps.append((t, time.perf_counter() - t0, [e.copy() for e in ests]))
            mi += 1
    return RunResult(ests, snaps, state.stats, state.world)
