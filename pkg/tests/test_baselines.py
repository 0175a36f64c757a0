import math

import numpy as np
import pytest

from decaystream.baselines import (
    ExactOracle,
    RandomizedResponse,
    RunningDiffBaseline,
    decayed_sum,
    rr_epsilon_of_flip,
    rr_flip_parameter,
)
from decaystream.mechanisms import DecaySpec
from decaystream.noise import RandomSource


def random_bits(seed, T):
    gen = RandomSource(seed)
    return [1 if gen.uniform() < 0.5 else 0 for _ in range(T)]


def test_oracle_examples():
    w = ExactOracle(DecaySpec.window(3))
    assert [w.push(float(x)) for x in (1, 0, 1, 1, 0)][-1] == 2.0
    e = ExactOracle(DecaySpec.exponential(0.5))
    assert [e.push(1.0) for _ in range(3)][-1] == 1.75
    p = ExactOracle(DecaySpec.polynomial(2.0, 0.5))
    assert [p.push(1.0) for _ in range(3)][-1] == pytest.approx(1 + 1 / 4 + 1 / 9)
    r = ExactOracle(DecaySpec.running())
    assert [r.push(float(x)) for x in (1, 1, 0, 1)][-1] == 3.0


def test_oracle_rolling_matches_direct_summation():
    specs = [
        DecaySpec.window(5),
        DecaySpec.exponential(0.8),
        DecaySpec.polynomial(1.5, 0.5),
        DecaySpec.running(),
    ]
    gen = RandomSource(1)
    xs = [gen.uniform() for _ in range(64)]
    for spec in specs:
        oracle = ExactOracle(spec)
        for j, x in enumerate(xs, 1):
            assert oracle.push(x) == pytest.approx(
                decayed_sum(spec, xs, j), abs=1e-9
            ), spec.kind


def test_flip_parameter_budget_matching_round_trip():
    for eps in (0.1, 0.5, 1.0, 2.0):
        f = rr_flip_parameter(eps)
        assert 0.0 < f < 1.0
        assert rr_epsilon_of_flip(f) == pytest.approx(eps, rel=1e-12)
    assert rr_flip_parameter(1.0) == pytest.approx(math.tanh(0.5), rel=1e-12)


def test_rr_rejects_non_bits():
    rr = RandomizedResponse(DecaySpec.window(4), 0.5, RandomSource(0))
    with pytest.raises(ValueError):
        rr.push(0.5)
    with pytest.raises(ValueError):
        RandomizedResponse(DecaySpec.window(4), 1.0, RandomSource(0))


def test_rr_near_one_keep_bias_recovers_exact_sum():
    xs = random_bits(3, 200)
    rr = RandomizedResponse(DecaySpec.window(16), 1.0 - 1e-9, RandomSource(3))
    oracle = ExactOracle(DecaySpec.window(16))
    for x in xs:
        est = rr.push(x)
        exact = oracle.push(float(x))
    assert est == pytest.approx(exact, abs=1e-5)


def test_rr_unbiased_at_fixed_step():
    W, j_star, trials, f = 16, 24, 10000, 0.5
    xs = random_bits(11, j_star)
    exact = decayed_sum(DecaySpec.window(W), xs, j_star)
    base = RandomSource(12)
    errs = np.empty(trials)
    for t in range(trials):
        rr = RandomizedResponse(DecaySpec.window(W), f, base.child(t))
        for x in xs:
            est = rr.push(x)
        errs[t] = est - exact
    per_bit_var = (1 - f * f) / (4 * f * f)
    se = math.sqrt(W * per_bit_var / trials)
    assert abs(errs.mean()) < 5.0 * se


def test_rr_standard_deviation_matches_theory():
    # sd of the window estimator at j = W is sqrt(W (1/f^2 - 1)) / 2
    W, f, trials = 4096, 0.5, 800
    base = RandomSource(21)
    vals = np.empty(trials)
    for t in range(trials):
        rr = RandomizedResponse(DecaySpec.window(W), f, base.child(t))
        for _ in range(W):
            est = rr.push(1)
        vals[t] = est
    theory = math.sqrt(W * (1 / f**2 - 1)) / 2
    assert abs(vals.std(ddof=1) - theory) < 0.1 * theory


def test_rr_per_bit_variance_helper():
    rr = RandomizedResponse(DecaySpec.running(), 0.5, RandomSource(0))
    assert rr.per_bit_variance() == pytest.approx((1 - 0.25) / (4 * 0.25))


def test_running_diff_noiseless_matches_window_oracle():
    xs = random_bits(5, 300)
    straw = RunningDiffBaseline(32, 300, 1.0, RandomSource(5), noisy=False)
    oracle = ExactOracle(DecaySpec.window(32))
    for x in xs:
        assert straw.push(float(x)) == pytest.approx(oracle.push(float(x)), abs=1e-9)


def test_running_diff_enforces_horizon():
    straw = RunningDiffBaseline(4, 8, 1.0, RandomSource(0))
    for _ in range(8):
        straw.push(1.0)
    with pytest.raises(ValueError):
        straw.push(1.0)
