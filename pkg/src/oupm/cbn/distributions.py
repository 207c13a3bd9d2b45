"""Leaf distributions of dependency trees.

Every distribution offers ``logpdf``, ``sample`` and ``support``.  ``support``
returns the finite tuple of outcomes (possibly including ones of zero mass)
or ``None`` when the support is infinite.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

from ..errors import ModelRuntimeError

NEG_INF = float("-inf")


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else NEG_INF


class Distribution:
    __slots__ = ()
    discrete = True

    def logpdf(self, v) -> float:
        raise NotImplementedError

    def sample(self, rng):
        raise NotImplementedError

    def support(self) -> Optional[Tuple]:
        return None

    def sup_density(self) -> float:
        return 1.0


class Categorical(Distribution):
    __slots__ = ("values", "probs", "_index")

    def __init__(self, values: Sequence, probs: Sequence[float], normalize: bool = True):
        probs = [float(p) for p in probs]
        if any(p < 0 or p != p for p in probs):
            raise ModelRuntimeError(f"negative or NaN probability in {probs}")
        total = sum(probs)
        if total <= 0:
            raise ModelRuntimeError("categorical probabilities sum to zero")
        if normalize and total != 1.0:
            probs = [p / total for p in probs]
        self.values = tuple(values)
        self.probs = tuple(probs)
        self._index = {}
        for v, p in zip(self.values, self.probs):
            self._index[v] = self._index.get(v, 0.0) + p

    def prob(self, v) -> float:
        return self._index.get(v, 0.0)

    def logpdf(self, v) -> float:
        return _log(self._index.get(v, 0.0))

    def sample(self, rng):
        u = rng.random()
        acc = 0.0
        last = None
        for v, p in zip(self.values, self.probs):
            if p > 0.0:
                acc += p
                last = v
                if u < acc:
                    return v
        return last

    def support(self):
        return self.values

    def __repr__(self):
        return f"Categorical({dict(zip(self.values, self.probs))})"


class Bernoulli(Categorical):
    """Two-point distribution; ``outcomes`` is (success, failure)."""
    __slots__ = ("p",)

    def __init__(self, p: float, outcomes=(True, False)):
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ModelRuntimeError(f"Bernoulli parameter {p} outside [0, 1]")
        self.p = p
        self.values = tuple(outcomes)
        self.probs = (p, 1.0 - p)
        self._index = {outcomes[0]: p, outcomes[1]: 1.0 - p}

    def sample(self, rng):
        return self.values[0] if rng.random() < self.p else self.values[1]

    def __repr__(self):
        return f"Bernoulli({self.p})"


class PointMass(Categorical):
    __slots__ = ()

    def __init__(self, value):
        self.values = (value,)
        self.probs = (1.0,)
        self._index = {value: 1.0}

    def sample(self, rng):
        return self.values[0]

    def __repr__(self):
        return f"PointMass({self.values[0]!r})"


NULL_DIST = PointMass(None)


class UniformChoice(Categorical):
    """Uniform over a finite set of objects; null with probability one if the set is empty."""
    __slots__ = ()

    def __init__(self, objects: Sequence):
        objects = tuple(objects)
        if not objects:
            objects = (None,)
        n = len(objects)
        self.values = objects
        self.probs = (1.0 / n,) * n
        self._index = dict.fromkeys(objects, 1.0 / n)

    def sample(self, rng):
        return self.values[int(rng.random() * len(self.values))]

    def __repr__(self):
        return f"UniformChoice({len(self.values)} objects)"


class Poisson(Distribution):
    __slots__ = ("lam", "_loglam")

    def __init__(self, lam: float):
        lam = float(lam)
        if not lam >= 0.0:
            raise ModelRuntimeError(f"Poisson rate {lam} is negative")
        self.lam = lam
        self._loglam = _log(lam)

    def logpdf(self, v) -> float:
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            return NEG_INF
        if self.lam == 0.0:
            return 0.0 if v == 0 else NEG_INF
        return v * self._loglam - self.lam - math.lgamma(v + 1)

    def prob(self, v) -> float:
        return math.exp(self.logpdf(v))

    def sample(self, rng):
        return int(rng.poisson(self.lam))

    def __repr__(self):
        return f"Poisson({self.lam})"


class UniformReal(Distribution):
    __slots__ = ("lo", "hi")
    discrete = False

    def __init__(self, lo: float, hi: float):
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise ModelRuntimeError(f"UniformReal needs lo < hi, got [{lo}, {hi}]")
        self.lo, self.hi = lo, hi

    def logpdf(self, v) -> float:
        if v is None or isinstance(v, bool) or not self.lo <= v <= self.hi:
            return NEG_INF
        return -math.log(self.hi - self.lo)

    def sample(self, rng):
        return self.lo + (self.hi - self.lo) * rng.random()

    def sup_density(self) -> float:
        return 1.0 / (self.hi - self.lo)

    def __repr__(self):
        return f"UniformReal({self.lo}, {self.hi})"


class Gaussian(Distribution):
    __slots__ = ("mean", "var")
    discrete = False

    def __init__(self, mean: float, var: float):
        var = float(var)
        if not var > 0.0:
            raise ModelRuntimeError(f"Gaussian variance must be positive, got {var}")
        if mean is None:
            raise ModelRuntimeError("Gaussian mean is null")
        self.mean, self.var = float(mean), var

    def logpdf(self, v) -> float:
        if v is None or isinstance(v, bool):
            return NEG_INF
        d = v - self.mean
        return -0.5 * (d * d / self.var + math.log(2.0 * math.pi * self.var))

    def sample(self, rng):
        return self.mean + math.sqrt(self.var) * rng.standard_normal()

    def sup_density(self) -> float:
        return 1.0 / math.sqrt(2.0 * math.pi * self.var)

    def __repr__(self):
        return f"Gaussian({self.mean}, {self.var})"
