from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

SAMPLERS = ("parent-mh", "gibbs", "gibbs-noblock")
ALIASES = {"mh": "parent-mh"}


@dataclass(frozen=True)
class SamplerConfig:
    """Settings for one chain.

    ``init_phase`` defaults to a tenth of ``burn_in``; during it birth/death
    moves ignore the density of the count variable's children.  Statistics
    are collected only after both burn-in and the initialization phase.
    """
    kind: str = "gibbs"
    steps: int = 10000
    burn_in: int = 0
    init_phase: Optional[int] = None
    birth_death_rate: float = 0.2
    seed: int = 0
    max_init_attempts: int = 10000
    debug: bool = False

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.kind!r}; choose from {', '.join(SAMPLERS)}")
        if self.steps < 0 or self.burn_in < 0:
            raise ValueError("steps and burn_in must be nonnegative")
        if self.burn_in > self.steps:
            raise ValueError("burn_in cannot exceed steps")
        if not 0.0 <= self.birth_death_rate < 1.0:
            raise ValueError("birth_death_rate must lie in [0, 1)")
        if self.init_phase is None:
            object.__setattr__(self, "init_phase", self.burn_in // 10)
        if self.init_phase < 0:
            raise ValueError("init_phase must be nonnegative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def stats_start(self) -> int:
        return max(self.burn_in, self.init_phase)
