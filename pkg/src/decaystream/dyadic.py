"""Interval-indexed complete binary tree over a contiguous time range.

The tree over ``[lo, lo + size - 1]`` (``size`` a power of two) has height
``log2(size) + 1``; leaves sit at level 1 and the node at level ``k`` with
0-based index ``i`` covers ``[lo + i*2**(k-1), lo + (i+1)*2**(k-1) - 1]``.
Each node carries a noiseless accumulator ``c0`` and a frozen noise term
``z`` drawn once when the node is first published; the published value is
always ``c0 + z`` and is never stored separately, so noise cannot drift.

Nodes are materialised lazily (an untouched node behaves as ``c0 = 0`` with
``z`` drawn on first publication, which is statistically identical to eager
initialisation because the noise is independent of the data).  The tree is
policy-free: which nodes an estimator updates, and whether the root counts as
a left node, is decided by callers.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

from .noise import RandomSource


class Interval(NamedTuple):
    """Inclusive 1-based node interval [l, u]; u - l + 1 is a power of two."""

    l: int
    u: int


class TreeNode(NamedTuple):
    """Inspection view of one counter: published value is c0 + z."""

    interval: Interval
    c0: float
    z: float

    @property
    def value(self) -> float:
        return self.c0 + self.z


class DyadicTree:
    """Sparse growable dyadic counter tree.

    ``scale_for_level`` maps a level (1 = leaves) to the Laplace scale of the
    initialisation noise at that level; with ``noisy=False`` every ``z`` is
    pinned to zero (test mode, not private).  Single-owner mutable structure.
    """

    def __init__(
        self,
        lo: int,
        size: int,
        rng: RandomSource,
        scale_for_level: Callable[[int], float],
        noisy: bool = True,
    ):
        if size < 1 or size & (size - 1):
            raise ValueError(f"tree size must be a power of two, got {size}")
        if lo < 1:
            raise ValueError(f"tree base index must be >= 1, got {lo}")
        self.lo = lo
        self.size = size
        self.height = size.bit_length()  # log2(size) + 1
        self._rng = rng
        self._scale_for_level = scale_for_level
        self.noisy = noisy
        self._c0: dict[tuple[int, int], float] = {}
        self._z: dict[tuple[int, int], float] = {}

    # -- indexing helpers ---------------------------------------------------

    @property
    def hi(self) -> int:
        return self.lo + self.size - 1

    def _check_node(self, iv: Interval) -> tuple[int, int]:
        length = iv.u - iv.l + 1
        if length < 1 or length & (length - 1):
            raise ValueError(f"{iv} is not a node interval (length not a power of two)")
        off = iv.l - self.lo
        if off < 0 or iv.u > self.hi or off % length:
            raise ValueError(f"{iv} is not aligned inside [{self.lo}, {self.hi}]")
        level = length.bit_length()
        return level, off // length

    def interval_of(self, level: int, index: int) -> Interval:
        length = 1 << (level - 1)
        l = self.lo + index * length
        return Interval(l, l + length - 1)

    # -- structural queries ---------------------------------------------------

    def is_left_node(self, iv: Interval) -> bool:
        """True iff the node precedes its sibling; the root reports False."""
        level, index = self._check_node(iv)
        if level == self.height:
            return False  # root convention: callers decide root handling
        return index % 2 == 0

    def path_intervals(self, i: int) -> list[Interval]:
        """All node intervals containing leaf i, leaf first (one per level)."""
        if not self.lo <= i <= self.hi:
            raise ValueError(f"leaf {i} outside [{self.lo}, {self.hi}]")
        off = i - self.lo
        return [self.interval_of(k, off >> (k - 1)) for k in range(1, self.height + 1)]

    def decompose_prefix(self, u: int, base: int | None = None) -> list[Interval]:
        """Tile the prefix [base, u] with maximal node intervals.

        Returns at most ceil(log2(u - base + 1)) intervals, pairwise disjoint
        and sorted; every interval after the first is a left node apart from
        the leading run along the left spine.  ``u = base - 1`` yields the
        empty prefix.  ``base`` defaults to the tree base and must be the
        start of an aligned block.
        """
        lo = self.lo if base is None else base
        if u == lo - 1:
            return []
        if not lo <= u <= self.hi:
            raise ValueError(f"prefix end {u} outside [{self.lo - 1}, {self.hi}]")
        out = []
        a = lo - self.lo  # 0-based offset of the block start
        p = u - lo + 1
        while p:
            align = (a & -a) if a else self.size
            top = 1 << (p.bit_length() - 1)
            s = align if align < top else top
            out.append(Interval(self.lo + a, self.lo + a + s - 1))
            a += s
            p -= s
        return out

    def decompose_nodes(self, u: int, base: int | None = None):
        """Same tiling as :meth:`decompose_prefix`, as (level, index, right_end)."""
        lo = self.lo if base is None else base
        if u == lo - 1:
            return
        if not lo <= u <= self.hi:
            raise ValueError(f"prefix end {u} outside [{self.lo - 1}, {self.hi}]")
        a = lo - self.lo
        p = u - lo + 1
        while p:
            align = (a & -a) if a else self.size
            top = 1 << (p.bit_length() - 1)
            s = align if align < top else top
            yield s.bit_length(), a // s, self.lo + a + s - 1
            a += s
            p -= s

    # -- counter access -------------------------------------------------------

    def add(self, level: int, index: int, w: float) -> None:
        key = (level, index)
        c0 = self._c0
        c0[key] = c0.get(key, 0.0) + w

    def c0_at(self, level: int, index: int) -> float:
        return self._c0.get((level, index), 0.0)

    def published(self, level: int, index: int) -> float:
        """Noisy counter value c0 + z; draws and freezes z on first touch."""
        key = (level, index)
        z = self._z.get(key)
        if z is None:
            if self.noisy:
                z = self._rng.laplace(self._scale_for_level(level))
            else:
                z = 0.0
            self._z[key] = z
        return self._c0.get(key, 0.0) + z

    def node(self, iv: Interval) -> TreeNode:
        """Inspection view; publishes the node (freezing its noise)."""
        level, index = self._check_node(iv)
        value = self.published(level, index)
        z = self._z[(level, index)]
        return TreeNode(iv, value - z, z)

    def prefix_value(self, u: int, base: int | None = None) -> float:
        """Sum of published counters tiling [base, u]; 0 for the empty prefix."""
        total = 0.0
        for level, index, _ in self.decompose_nodes(u, base):
            total += self.published(level, index)
        return total

    # -- growth and eviction --------------------------------------------------

    def grow_double(self, carry_weight: float) -> "DyadicTree":
        """Double the span; the old root becomes the left child of a new root
        seeded with ``carry_weight`` times the old root's noiseless value.
        """
        if self.lo != 1:
            raise ValueError("only trees based at 1 grow")
        if carry_weight < 0.0:
            raise ValueError(f"carry weight must be >= 0, got {carry_weight}")
        carried = carry_weight * self._c0.get((self.height, 0), 0.0)
        self.size *= 2
        self.height += 1
        if carried:
            self._c0[(self.height, 0)] = carried
        return self

    def evict_covered(self, watermark: int) -> None:
        """Drop nodes whose parent interval ends at or before ``watermark``.

        Such nodes can never appear in a later prefix tiling (the parent is
        always preferred), so their counters are dead.  Keeps at most one
        node per level.
        """
        height = self.height
        doomed = []
        for level, index in self._c0.keys() | self._z.keys():
            if level == height:
                continue
            parent_end = self.lo + ((index >> 1) + 1) * (1 << level) - 1
            if parent_end <= watermark:
                doomed.append((level, index))
        for key in doomed:
            self._c0.pop(key, None)
            self._z.pop(key, None)

    def live_nodes(self) -> set[tuple[int, int]]:
        return self._c0.keys() | self._z.keys()

    def counters(self) -> dict[tuple[int, int], float]:
        """Snapshot of all noiseless accumulators (for sensitivity audits)."""
        return dict(self._c0)
