"""Seeded randomness, Laplace sampling and per-level privacy budget schedules.

All randomness in the library flows through :class:`RandomSource`, a splittable
counter-based generator (Philox) so that any experiment is reproducible from a
single 64-bit seed and independent sub-streams can be handed to parallel
trials, tree nodes or histogram keys.

This generator is NOT cryptographically secure and the Laplace sampler works
in plain IEEE double precision (no snapping / discretisation).  The library
studies the accuracy of private estimators, not attack resistance; do not use
it to protect real data against an adversary exploiting floating-point
artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_BUFFER = 4096


def laplace_from_uniform(u: float, b: float) -> float:
    """Inverse-CDF transform of u in (-1/2, 1/2) to a zero-mean Laplace(b) draw.

    u = 0 maps to the median 0; the endpoints +-1/2 are excluded to avoid
    log(0).
    """
    if b <= 0.0:
        raise ValueError(f"Laplace scale must be positive, got {b}")
    if not -0.5 < u < 0.5:
        raise ValueError(f"uniform input must lie in (-1/2, 1/2), got {u}")
    if u == 0.0:
        return 0.0
    m = math.log(1.0 - 2.0 * abs(u))  # <= 0
    return b * m if u < 0.0 else -b * m


class RandomSource:
    """Deterministic splittable random source.

    Identical seeds give identical draw sequences on every platform.
    ``child(i)`` derives an independent stream for each index ``i``, so
    parallel trials never share state.  Single-owner: a source may be moved
    between threads but must never be used concurrently.
    """

    def __init__(self, seed: int, _path: tuple = ()):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.seed = int(seed)
        self._path = tuple(_path)
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=self._path))
        )
        self._buf: list[float] = []
        self._pos = 0

    def child(self, index: int) -> "RandomSource":
        """Derive the ``index``-th independent sub-stream (index < 2**64)."""
        if not 0 <= index < 2**64:
            raise ValueError(f"child index out of range: {index}")
        return RandomSource(self.seed, self._path + (index & 0xFFFFFFFF, index >> 32))

    def uniform(self) -> float:
        """One double in [0, 1)."""
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BUFFER).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def laplace(self, b: float) -> float:
        """One zero-mean Laplace(b) draw via the inverse CDF."""
        u = self.uniform()
        while u == 0.0:  # keep 1 - 2|u - 1/2| strictly positive
            u = self.uniform()
        v = u - 0.5
        m = math.log(1.0 - 2.0 * abs(v))
        return b * m if v < 0.0 else -b * m

    def laplace_vector(self, b: float, n: int) -> np.ndarray:
        """n independent Laplace(b) draws (vectorised, same transform)."""
        if b < 0.0:
            raise ValueError(f"Laplace scale must be non-negative, got {b}")
        u = self._gen.random(n)
        u[u == 0.0] = 0.5  # measure-zero guard; maps to median
        v = u - 0.5
        return -b * np.sign(v) * np.log(1.0 - 2.0 * np.abs(v))


@dataclass(frozen=True)
class LaplaceScale:
    """Scale parameter b of a zero-mean Laplace distribution (variance 2*b**2)."""

    b: float

    def __post_init__(self):
        if not self.b > 0.0:
            raise ValueError(f"Laplace scale must be positive, got {self.b}")

    @property
    def variance(self) -> float:
        return 2.0 * self.b * self.b


def laplace_sample(rng: RandomSource, scale: LaplaceScale) -> float:
    """One draw from the zero-mean Laplace distribution with the given scale."""
    return rng.laplace(scale.b)


@dataclass(frozen=True)
class PrivacyBudget:
    """Total privacy parameter, optional error probability and level schedule.

    If ``level_schedule`` is given its terms must sum to at most ``epsilon``
    (1e-9 relative slack for truncated series).
    """

    epsilon: float
    gamma: float | None = None
    level_schedule: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.level_schedule is not None:
            sched = tuple(float(e) for e in self.level_schedule)
            if any(e <= 0.0 for e in sched):
                raise ValueError("level schedule terms must be positive")
            if sum(sched) > self.epsilon * (1.0 + 1e-9):
                raise ValueError("level schedule exceeds the total budget")
            object.__setattr__(self, "level_schedule", sched)


@lru_cache(maxsize=None)
def zeta(beta: float) -> float:
    """Riemann zeta via truncated series plus Euler-Maclaurin tail.

    Accurate to well below 1e-12 for beta > 1; beta = 2 short-circuits to the
    closed form pi**2 / 6.
    """
    if not beta > 1.0:
        raise ValueError(f"zeta series diverges for beta <= 1, got {beta}")
    if beta == 2.0:
        return math.pi**2 / 6.0
    n = 1_000_000
    k = np.arange(1, n, dtype=np.float64)
    head = float(np.sum(k**-beta))
    tail = (
        n ** (1.0 - beta) / (beta - 1.0)
        + 0.5 * n**-beta
        + beta * n ** (-beta - 1.0) / 12.0
    )
    return head + tail


def level_epsilons(epsilon: float, beta: float, k_max: int) -> list[float]:
    """Per-level budgets eps_k = epsilon / (zeta(beta) * k**beta), k = 1..k_max.

    The infinite series sums to exactly ``epsilon``, so any finite prefix
    stays strictly below it.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    z = zeta(beta)
    return [epsilon / (z * k**beta) for k in range(1, k_max + 1)]
