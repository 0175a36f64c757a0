"""Private streaming estimators for decayed sums.

Four estimators behind one contract (``push(x) -> estimate`` for inputs in
[0, 1]):

* :class:`WindowSum` -- sum of the last W updates, W a power of two.  The
  stream is cut into blocks of size W, each with its own dyadic counter tree;
  a window spanning two blocks is a block suffix plus a block prefix, so each
  update touches exactly ``log2(W) + 1`` counters and each estimate reads
  ``O(log W)`` of them.
* :class:`AllWindowSum` -- one growing tree answering window queries for
  every W simultaneously, with per-level budgets ``eps_k`` that sum to the
  total budget.
* :class:`ExponentialSum` -- geometrically discounted sum on a growing tree;
  each node holds the discounted sum of its interval, only left nodes and the
  current root are updated, and stale nodes are evicted to keep one node per
  level.
* :class:`PolynomialSum` -- power-law discounted sum approximated by a bank
  of lagged, geometrically scaled window estimators; the noise-free output
  F' satisfies (1 - beta) * F <= F' <= F.

``RunningSum`` (undiscounted prefix sum) is the degenerate window query on
the growing tree.  Estimates at step j read only counters whose intervals end
at or before j, so the whole output sequence is a deterministic function of
the noisy counter vector.

With ``noisy=False`` all initialisation noise is pinned to zero; outputs are
then exact (window/exponential/running) or within the deterministic band
(polynomial) and NOT private.

Mechanism states are single-owner and mutable: push/query are not reentrant
and must never run concurrently on one state.  Parallel experiments give
every trial its own state and its own child random source.
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass

from .dyadic import DyadicTree, Interval
from .noise import PrivacyBudget, RandomSource, zeta

_TINY_WEIGHT = 1e-300  # discount weights below this clamp to zero


@dataclass(frozen=True)
class DecaySpec:
    """Which discount applies to past updates.

    kind is one of ``window`` (weight 1 on the last W updates), ``exponential``
    (weight alpha**age), ``polynomial`` (weight (age+1)**-c) or ``running``
    (weight 1 everywhere).  ``beta`` is the multiplicative slack used by the
    polynomial estimator.
    """

    kind: str
    W: int | None = None
    alpha: float | None = None
    c: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind == "window":
            if self.W is None or self.W < 1:
                raise ValueError("window decay needs W >= 1")
        elif self.kind == "exponential":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("exponential decay needs alpha in (0, 1)")
        elif self.kind == "polynomial":
            if self.c is None or not self.c > 1.0:
                raise ValueError("polynomial decay needs c > 1")
            if self.beta is None or not 0.0 < self.beta < 1.0:
                raise ValueError("polynomial decay needs beta in (0, 1)")
        elif self.kind != "running":
            raise ValueError(f"unknown decay kind: {self.kind!r}")

    @classmethod
    def window(cls, W: int) -> "DecaySpec":
        return cls("window", W=W)

    @classmethod
    def exponential(cls, alpha: float) -> "DecaySpec":
        return cls("exponential", alpha=alpha)

    @classmethod
    def polynomial(cls, c: float, beta: float) -> "DecaySpec":
        return cls("polynomial", c=c, beta=beta)

    @classmethod
    def running(cls) -> "DecaySpec":
        return cls("running")

    def weight(self, age: int) -> float:
        """Discount applied to an update ``age`` steps in the past."""
        if age < 0:
            raise ValueError("age must be >= 0")
        if self.kind == "window":
            return 1.0 if age < self.W else 0.0
        if self.kind == "exponential":
            w = self.alpha**age
            return w if w >= _TINY_WEIGHT else 0.0
        if self.kind == "polynomial":
            return (age + 1.0) ** -self.c
        return 1.0

    def cumulative(self, m: int) -> float:
        """Sum of the first m weights (ages 0..m-1)."""
        if m <= 0:
            return 0.0
        if self.kind == "window":
            return float(min(m, self.W))
        if self.kind == "exponential":
            return (1.0 - self.alpha**m) / (1.0 - self.alpha)
        if self.kind == "polynomial":
            return sum((i + 1.0) ** -self.c for i in range(m))
        return float(m)

    def energy(self, m: int) -> float:
        """Sum of squared weights over ages 0..m-1."""
        return sum(self.weight(i) ** 2 for i in range(m))


# ---------------------------------------------------------------------------
# sensitivity constants


def exp_decay_sensitivity(alpha: float) -> float:
    """Worst-case L1 counter change for one substituted update, exponential decay.

    Touched counters sit at geometrically growing distances, so the change is
    bounded by (1 / (alpha ln 2)) * (ln(2 alpha / (1 - alpha)) + 1/2 + ln 2).
    Valid (and increasing) on alpha in (2/3, 1); below 2/3 the estimand's
    range is at most 3 and a constant output is already accurate.
    """
    if not 2.0 / 3.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (2/3, 1), got {alpha}")
    return (1.0 / (alpha * math.log(2.0))) * (
        math.log(2.0 * alpha / (1.0 - alpha)) + 0.5 + math.log(2.0)
    )


def poly_decay_sensitivity(c: float, beta: float) -> float:
    """Worst-case L1 counter change across the window-estimator bank.

    log2(1 / (1 - beta)) / (c * beta**2) + 1 / beta; the logarithm is base 2
    because it counts dyadic tree levels.
    """
    if not c > 1.0:
        raise ValueError(f"c must exceed 1, got {c}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    return math.log2(1.0 / (1.0 - beta)) / (c * beta * beta) + 1.0 / beta


# ---------------------------------------------------------------------------
# window sum


class WindowSum:
    """Private sliding-window sum with per-block dyadic trees.

    W must be a power of two unless ``counter_scale`` overrides the default
    per-counter noise scale ``(log2 W + 1) / epsilon`` (the decayed-sum
    composition relies on arbitrary W with an externally supplied scale; in
    that case the block tree is padded to the next power of two).  Only the
    two most recent block trees are retained.
    """

    def __init__(
        self,
        W: int,
        epsilon: float,
        rng: RandomSource,
        *,
        counter_scale: float | None = None,
        noisy: bool = True,
        retain_all: bool = False,
    ):
        if W < 1:
            raise ValueError(f"window size must be >= 1, got {W}")
        if not epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        if counter_scale is None:
            if W & (W - 1):
                raise ValueError(
                    f"window size {W} is not a power of two; use AllWindowSum "
                    "for arbitrary window sizes"
                )
            counter_scale = (math.log2(W) + 1.0) / epsilon
        self.W = W
        self.epsilon = epsilon
        self.counter_scale = counter_scale
        self.noisy = noisy
        self._rng = rng
        # block trees are dense heaps: slot 1 is the block root, leaves at
        # [S, 2S).  Noise is drawn eagerly per block (independent of data).
        self._S = 1 << (W - 1).bit_length()
        self._cur: tuple[array, array] | None = None
        self._prev: tuple[array, array] | None = None
        self._blk = -1
        self.i = 0
        # retain_all keeps every block tree so sensitivity audits can diff the
        # complete counter vector; never used on the live estimation path
        self._archive: list[tuple[int, tuple[array, array]]] | None = (
            [] if retain_all else None
        )

    def _new_block(self) -> tuple[array, array]:
        n = 2 * self._S
        c0 = array("d", bytes(8 * n))
        if self.noisy:
            z = array("d", self._rng.laplace_vector(self.counter_scale, n).tobytes())
        else:
            z = array("d", bytes(8 * n))
        return c0, z

    def _prefix_published(self, tree: tuple[array, array], p: int) -> float:
        # sum of published counters tiling the first p leaves of the block
        c0, z = tree
        S = self._S
        total = 0.0
        a = 0
        while p:
            v = p.bit_length() - 1
            n = (S + a) >> v
            total += c0[n] + z[n]
            s = 1 << v
            a += s
            p -= s
        return total

    def push(self, x: float) -> float:
        """Feed one update, return the window estimate at the new step."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"update must lie in [0, 1], got {x}")
        i = self.i + 1
        self.i = i
        W = self.W
        blk = (i - 1) // W
        if blk != self._blk:
            if self._archive is not None and self._prev is not None:
                self._archive.append((self._blk - 1, self._prev))
            self._prev = self._cur
            self._cur = self._new_block()
            self._blk = blk
        off = (i - 1) - blk * W
        c0 = self._cur[0]
        n = self._S + off
        while n:
            c0[n] += x
            n >>= 1
        p = off + 1
        est = self._prefix_published(self._cur, p)
        if self._prev is not None and p < W:
            est += self._prefix_published(self._prev, W) - self._prefix_published(
                self._prev, p
            )
        return est

    # -- inspection (tests, audits) --------------------------------------

    def node(self, iv: Interval):
        """(c0, z) of the counter at a node interval of a live block tree."""
        length = iv.u - iv.l + 1
        if length < 1 or length & (length - 1):
            raise ValueError(f"{iv} is not a node interval")
        blk = (iv.l - 1) // self.W
        lo = blk * self.W + 1
        off = iv.l - lo
        if off % length or iv.u > lo + self._S - 1:
            raise ValueError(f"{iv} is not aligned in block {blk}")
        tree = self._cur if blk == self._blk else (self._prev if blk == self._blk - 1 else None)
        if tree is None:
            raise ValueError(f"block {blk} is not retained")
        n = (self._S + off) >> (length.bit_length() - 1)
        return tree[0][n], tree[1][n]

    def counters(self) -> dict[int, "object"]:
        """Noiseless accumulators per retained block (numpy arrays)."""
        import numpy as np

        out = {}
        if self._archive:
            for blk, tree in self._archive:
                out[blk] = np.frombuffer(tree[0], dtype=np.float64).copy()
        if self._prev is not None:
            out[self._blk - 1] = np.frombuffer(self._prev[0], dtype=np.float64).copy()
        if self._cur is not None:
            out[self._blk] = np.frombuffer(self._cur[0], dtype=np.float64).copy()
        return out


# ---------------------------------------------------------------------------
# all-window sum / running sum


class AllWindowSum:
    """One growing tree answering window queries for every window size.

    Level k counters carry noise of scale ``1 / eps_k`` with
    ``eps_k = epsilon / (zeta(schedule_beta) * k**schedule_beta)``, so the
    per-level budgets sum to ``epsilon`` over the infinite tree.  ``push``
    produces no output; ``query`` and ``running_sum`` may be asked for any
    past step.
    """

    def __init__(
        self,
        epsilon: float,
        rng: RandomSource,
        *,
        schedule_beta: float = 2.0,
        level_schedule: tuple[float, ...] | None = None,
        noisy: bool = True,
    ):
        if not epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        if not schedule_beta > 1.0:
            raise ValueError(f"schedule exponent must exceed 1, got {schedule_beta}")
        self.epsilon = epsilon
        self.schedule_beta = schedule_beta
        self._explicit = tuple(level_schedule) if level_schedule else None
        self._zeta = zeta(schedule_beta)
        self.step = 0
        self._tree = DyadicTree(1, 1, rng, self._scale_for_level, noisy)

    def level_epsilon(self, k: int) -> float:
        if self._explicit is not None:
            if k > len(self._explicit):
                raise ValueError(
                    f"explicit level schedule has {len(self._explicit)} terms "
                    f"but level {k} was reached"
                )
            return self._explicit[k - 1]
        return self.epsilon / (self._zeta * k**self.schedule_beta)

    def _scale_for_level(self, k: int) -> float:
        return 1.0 / self.level_epsilon(k)

    def push(self, x: float) -> None:
        """Feed one update (queries are separate)."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"update must lie in [0, 1], got {x}")
        i = self.step + 1
        self.step = i
        tree = self._tree
        if tree.size == i - 1:
            tree.grow_double(1.0)
        off = i - 1
        for level in range(1, tree.height + 1):
            tree.add(level, off >> (level - 1), x)

    def query(self, j: int, W: int) -> float:
        """Window estimate for the W most recent updates as of step j <= now.

        W is internally aligned up to a power of two W' that only controls
        block boundaries; the estimate still targets the exact W-window.
        W > j degenerates to the running prefix.
        """
        if W < 1:
            raise ValueError(f"window size must be >= 1, got {W}")
        if not 0 <= j <= self.step:
            raise ValueError(f"step {j} outside [0, {self.step}]")
        if j == 0:
            return 0.0
        if W >= j:
            return self._tree.prefix_value(j)
        Wp = 1 << (W - 1).bit_length()
        k = -(-j // Wp)  # ceil
        tree = self._tree
        block_k = (k - 1) * Wp + 1
        if j - W >= block_k - 1:
            # window inside block k
            return tree.prefix_value(j, base=block_k) - tree.prefix_value(
                j - W, base=block_k
            )
        block_prev = (k - 2) * Wp + 1
        return (
            tree.prefix_value(block_k - 1, base=block_prev)
            - tree.prefix_value(j - W, base=block_prev)
            + tree.prefix_value(j, base=block_k)
        )

    def running_sum(self, j: int) -> float:
        """Private prefix-sum estimate at step j <= now (0 for j = 0)."""
        if not 0 <= j <= self.step:
            raise ValueError(f"step {j} outside [0, {self.step}]")
        return self._tree.prefix_value(j) if j else 0.0

    def counters(self) -> dict[tuple[int, int], float]:
        return self._tree.counters()


class RunningSum:
    """Streaming prefix-sum estimator (push returns the current estimate)."""

    def __init__(
        self,
        epsilon: float,
        rng: RandomSource,
        *,
        schedule_beta: float = 2.0,
        level_schedule: tuple[float, ...] | None = None,
        noisy: bool = True,
    ):
        self.epsilon = epsilon
        self._aw = AllWindowSum(
            epsilon,
            rng,
            schedule_beta=schedule_beta,
            level_schedule=level_schedule,
            noisy=noisy,
        )

    @property
    def step(self) -> int:
        return self._aw.step

    def push(self, x: float) -> float:
        self._aw.push(x)
        return self._aw.running_sum(self._aw.step)

    def query(self, j: int) -> float:
        return self._aw.running_sum(j)

    def counters(self):
        return self._aw.counters()


class FixedWindowView:
    """Streaming adapter: AllWindowSum queried at one window size per step.

    This is the route for window sizes that are not powers of two.
    """

    def __init__(
        self,
        W: int,
        epsilon: float,
        rng: RandomSource,
        *,
        schedule_beta: float = 2.0,
        noisy: bool = True,
    ):
        if W < 1:
            raise ValueError(f"window size must be >= 1, got {W}")
        self.W = W
        self.epsilon = epsilon
        self._aw = AllWindowSum(epsilon, rng, schedule_beta=schedule_beta, noisy=noisy)

    @property
    def step(self) -> int:
        return self._aw.step

    def push(self, x: float) -> float:
        self._aw.push(x)
        return self._aw.query(self._aw.step, self.W)

    def counters(self):
        return self._aw.counters()


# ---------------------------------------------------------------------------
# exponential decay


class ExponentialSum:
    """Private geometrically discounted sum on a growing tree.

    Node [l, u] accumulates ``sum_i x_i * alpha**(u - i)``; on doubling, the
    old root's noiseless value is carried into the new root with weight
    ``alpha**span``.  Updates touch left-node ancestors plus the current root
    (the carry only seeds the pre-growth prefix, so the root must keep
    receiving updates for the top-level tiling to stay current; the touched
    chain still has geometrically growing gaps, so the sensitivity constant
    is unchanged).  Eviction keeps at most one node per level.
    """

    def __init__(
        self,
        alpha: float,
        epsilon: float,
        rng: RandomSource,
        *,
        noisy: bool = True,
        evict: bool = True,
    ):
        self.lam = exp_decay_sensitivity(alpha)  # validates alpha in (2/3, 1)
        if not epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.alpha = alpha
        self.epsilon = epsilon
        self.counter_scale = self.lam / epsilon
        self._evict = evict
        self.step = 0
        self._tree = DyadicTree(1, 1, rng, lambda _level: self.counter_scale, noisy)

    def push(self, x: float) -> float:
        """Feed one update, return the discounted-sum estimate."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"update must lie in [0, 1], got {x}")
        i = self.step + 1
        self.step = i
        tree = self._tree
        alpha = self.alpha
        if tree.size == i - 1:
            tree.grow_double(alpha ** (i - 1))
        off = i - 1
        height = tree.height
        if x:
            for level in range(1, height + 1):
                idx = off >> (level - 1)
                if level != height and idx & 1:
                    continue  # right node, never updated
                u = (idx + 1) << (level - 1)
                w = alpha ** (u - i)
                if w >= _TINY_WEIGHT:
                    tree.add(level, idx, x * w)
        est = 0.0
        for level, idx, right in tree.decompose_nodes(i):
            w = alpha ** (i - right)
            est += tree.published(level, idx) * w
        if self._evict:
            tree.evict_covered(i)
        return est

    def live_node_count(self) -> int:
        return len(self._tree.live_nodes())

    def nodes_per_level(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for level, _ in self._tree.live_nodes():
            out[level] = out.get(level, 0) + 1
        return out

    def counters(self) -> dict[tuple[int, int], float]:
        return self._tree.counters()


# ---------------------------------------------------------------------------
# polynomial decay


def poly_breakpoint(c: float, beta: float, j: int) -> int:
    """Largest age whose weight is at least (1-beta)**j (0 for j = 0)."""
    if j == 0:
        return 0
    return math.floor((1.0 - beta) ** (-j / c)) - 1


class _PolyChild:
    __slots__ = ("lag", "scale", "win")

    def __init__(self, lag: int, scale: float, win: WindowSum):
        self.lag = lag
        self.scale = scale
        self.win = win


class PolynomialSum:
    """Private power-law discounted sum via a bank of window estimators.

    Ages are grouped into bands (b(j-1), b(j)] on which the weight
    (age + 1)**-c is within a (1-beta) factor of (1-beta)**j; band j is
    served by a window estimator of size b(j) - b(j-1) fed the raw stream
    lagged by b(j-1) + 1 and scaled by (1-beta)**j, plus one undelayed
    size-1 estimator for age 0.  Empty bands (b(j) = b(j-1)) spawn nothing.
    Every counter in every child uses the same noise scale lambda/epsilon
    where lambda = poly_decay_sensitivity(c, beta).

    The noise-free output F' satisfies (1-beta) F <= F' <= F for the true
    discounted sum F.
    """

    def __init__(
        self,
        c: float,
        beta: float,
        epsilon: float,
        rng: RandomSource,
        *,
        noisy: bool = True,
        retain_all: bool = False,
    ):
        self.lam = poly_decay_sensitivity(c, beta)
        if not epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.c = c
        self.beta = beta
        self.epsilon = epsilon
        self.counter_scale = self.lam / epsilon
        self.noisy = noisy
        self._rng = rng
        self._retain_all = retain_all
        self.step = 0
        self._buffer: list[float] = []
        self._children = [
            _PolyChild(0, 1.0, self._make_window(1, 0))
        ]  # age 0, weight 1
        self._next_j = 1
        self._prev_b = 0  # b(j - 1) of the next band to consider

    def _make_window(self, W: int, child_id: int) -> WindowSum:
        return WindowSum(
            W,
            self.epsilon,
            self._rng.child(child_id),
            counter_scale=self.counter_scale,
            noisy=self.noisy,
            retain_all=self._retain_all,
        )

    def push(self, x: float) -> float:
        """Feed one update, return the discounted-sum estimate."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"update must lie in [0, 1], got {x}")
        i = self.step + 1
        self.step = i
        self._buffer.append(x)
        # spawn the estimator for every band whose first lagged input exists
        while i - (self._prev_b + 1) >= 1:
            j = self._next_j
            b = poly_breakpoint(self.c, self.beta, j)
            self._next_j += 1
            if b > self._prev_b:
                self._children.append(
                    _PolyChild(
                        self._prev_b + 1,
                        (1.0 - self.beta) ** j,
                        self._make_window(b - self._prev_b, j),
                    )
                )
                self._prev_b = b
        buf = self._buffer
        est = 0.0
        for child in self._children:
            t = i - child.lag
            if t >= 1:
                est += child.win.push(child.scale * buf[t - 1])
        return est

    def child_windows(self) -> list[int]:
        return [ch.win.W for ch in self._children]

    def counters(self) -> dict[tuple[int, int], "object"]:
        out = {}
        for ci, ch in enumerate(self._children):
            for blk, arr in ch.win.counters().items():
                out[(ci, blk)] = arr
        return out


# ---------------------------------------------------------------------------
# factory


def make_mechanism(
    decay: DecaySpec,
    budget: PrivacyBudget | float,
    rng: RandomSource,
    *,
    noisy: bool = True,
    schedule_beta: float = 2.0,
):
    """Build the streaming estimator for a decay spec and privacy budget.

    Window sizes that are not powers of two are routed to the growing-tree
    estimator (the estimand is unchanged; only block alignment differs).
    """
    if isinstance(budget, PrivacyBudget):
        epsilon = budget.epsilon
        level_schedule = budget.level_schedule
    else:
        epsilon = float(budget)
        level_schedule = None
    if decay.kind == "window":
        if decay.W & (decay.W - 1):
            return FixedWindowView(
                decay.W, epsilon, rng, schedule_beta=schedule_beta, noisy=noisy
            )
        return WindowSum(decay.W, epsilon, rng, noisy=noisy)
    if decay.kind == "exponential":
        return ExponentialSum(decay.alpha, epsilon, rng, noisy=noisy)
    if decay.kind == "polynomial":
        return PolynomialSum(decay.c, decay.beta, epsilon, rng, noisy=noisy)
    return RunningSum(
        epsilon,
        rng,
        schedule_beta=schedule_beta,
        level_schedule=level_schedule,
        noisy=noisy,
    )
