"""Non-private exact oracle and baseline estimators used for evaluation.

The oracle is the ground truth every mechanism is scored against.  The
randomized-response baseline is the classic per-bit local scheme: its error
grows with the square root of the decay function's energy, which is what the
tree mechanisms are designed to beat.  The running-difference baseline
estimates a window sum as the difference of two private prefix sums from a
single uniform-noise tree; its error grows with the stream position instead
of staying bounded by the window.
"""

from __future__ import annotations

import math
from array import array
from collections import deque

from .mechanisms import DecaySpec
from .noise import RandomSource


def decayed_sum(decay: DecaySpec, xs, j: int | None = None) -> float:
    """Exact decayed sum of xs[:j] by direct summation (reference oracle)."""
    if j is None:
        j = len(xs)
    if not 0 <= j <= len(xs):
        raise ValueError(f"step {j} outside [0, {len(xs)}]")
    return sum(xs[i] * decay.weight(j - 1 - i) for i in range(j))


class ExactOracle:
    """Streaming exact decayed sum.

    Uses rolling recurrences where they are exact (window: add/subtract;
    exponential: F <- alpha * F + x; running: accumulate) and direct
    summation for polynomial decay.
    """

    def __init__(self, decay: DecaySpec):
        self.decay = decay
        self.step = 0
        self._acc = 0.0
        self._recent: deque[float] | None = (
            deque() if decay.kind == "window" else None
        )
        self._buffer: list[float] | None = (
            [] if decay.kind == "polynomial" else None
        )

    def push(self, x: float) -> float:
        self.step += 1
        kind = self.decay.kind
        if kind == "window":
            self._recent.append(x)
            self._acc += x
            if len(self._recent) > self.decay.W:
                self._acc -= self._recent.popleft()
            return self._acc
        if kind == "exponential":
            self._acc = self.decay.alpha * self._acc + x
            return self._acc
        if kind == "polynomial":
            self._buffer.append(x)
            return decayed_sum(self.decay, self._buffer)
        self._acc += x
        return self._acc


def rr_flip_parameter(epsilon: float) -> float:
    """Bit-keep bias whose randomized response is epsilon-private.

    Flipping a bit with probability (1 - f)/2 gives privacy parameter
    ln((1 + f) / (1 - f)); inverting yields f = tanh(epsilon / 2).
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return math.tanh(epsilon / 2.0)


def rr_epsilon_of_flip(f: float) -> float:
    """Privacy parameter of randomized response with bit-keep bias f."""
    if not 0.0 < f < 1.0:
        raise ValueError(f"flip parameter must lie in (0, 1), got {f}")
    return math.log((1.0 + f) / (1.0 - f))


class RandomizedResponse:
    """Per-bit randomized response with an unbiased decayed-sum estimate.

    Each input bit is replaced by 1 - x with probability (1 - f)/2 and the
    exact decayed statistic of the flipped stream is kept.  The estimate
    rescales each stored bit y to (y - (1 - f)/2) / f, which has expectation
    x, so the decayed estimate is unbiased; its standard deviation scales
    with the square root of the decay function's energy.
    """

    def __init__(self, decay: DecaySpec, flip_parameter: float, rng: RandomSource):
        if not 0.0 < flip_parameter < 1.0:
            raise ValueError(
                f"flip parameter must lie in (0, 1), got {flip_parameter}"
            )
        self.decay = decay
        self.f = flip_parameter
        self._rng = rng
        self._flip_p = (1.0 - flip_parameter) / 2.0
        self._stored = ExactOracle(decay)  # decayed sum of flipped bits
        self._ones = ExactOracle(decay)  # decayed sum of the all-ones stream
        self.step = 0

    def push(self, x) -> float:
        if x not in (0, 1):
            raise ValueError(f"randomized response takes bits, got {x}")
        self.step += 1
        y = float(x)
        if self._rng.uniform() < self._flip_p:
            y = 1.0 - y
        s = self._stored.push(y)
        g = self._ones.push(1.0)
        return (s - self._flip_p * g) / self.f

    def per_bit_variance(self) -> float:
        """Variance of the rescaled single-bit estimator."""
        return (1.0 - self.f * self.f) / (4.0 * self.f * self.f)


class RunningDiffBaseline:
    """Window sum as a difference of private prefix sums (known horizon).

    A single dense dyadic tree over the whole horizon with uniform per-node
    noise of scale ``(log2(horizon') + 1) / epsilon``; the window estimate at
    step i is prefix(i) - prefix(i - W).  Error at step i grows with the
    number of tiling nodes of the two prefixes, i.e. with log i, and for
    large i dwarfs the window range.
    """

    def __init__(
        self,
        W: int,
        horizon: int,
        epsilon: float,
        rng: RandomSource,
        *,
        noisy: bool = True,
    ):
        if W < 1 or horizon < 1:
            raise ValueError("window size and horizon must be >= 1")
        if not epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.W = W
        self.horizon = horizon
        self._S = 1 << (horizon - 1).bit_length()
        self.counter_scale = (math.log2(self._S) + 1.0) / epsilon
        n = 2 * self._S
        self._c0 = array("d", bytes(8 * n))
        if noisy:
            self._z = array("d", rng.laplace_vector(self.counter_scale, n).tobytes())
        else:
            self._z = array("d", bytes(8 * n))
        self.i = 0

    def _prefix(self, p: int) -> float:
        c0, z, S = self._c0, self._z, self._S
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
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"update must lie in [0, 1], got {x}")
        i = self.i + 1
        if i > self.horizon:
            raise ValueError(f"stream exceeds the declared horizon {self.horizon}")
        self.i = i
        c0 = self._c0
        n = self._S + (i - 1)
        while n:
            c0[n] += x
            n >>= 1
        est = self._prefix(i)
        if i > self.W:
            est -= self._prefix(i - self.W)
        return est
