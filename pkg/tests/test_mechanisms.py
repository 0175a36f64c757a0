import math

import numpy as np
import pytest

from decaystream.dyadic import Interval
from decaystream.mechanisms import (
    AllWindowSum,
    DecaySpec,
    ExponentialSum,
    FixedWindowView,
    PolynomialSum,
    RunningSum,
    WindowSum,
    exp_decay_sensitivity,
    make_mechanism,
    poly_breakpoint,
    poly_decay_sensitivity,
)
from decaystream.noise import PrivacyBudget, RandomSource


def brute_window(xs, j, W):
    return sum(xs[i] for i in range(max(0, j - W), j))


def brute_exp(xs, j, alpha):
    return sum(xs[i] * alpha ** (j - 1 - i) for i in range(j))


def brute_poly(xs, j, c):
    return sum(xs[i] * (j - i) ** -c for i in range(j))


def random_stream(seed, T, binary=True):
    gen = RandomSource(seed)
    if binary:
        return [1.0 if gen.uniform() < 0.5 else 0.0 for _ in range(T)]
    return [gen.uniform() for _ in range(T)]


# ---------------------------------------------------------------------------
# window sum


def test_window_counter_scale_and_sizes():
    assert WindowSum(4, 1.0, RandomSource(0)).counter_scale == 3.0
    assert WindowSum(1, 2.0, RandomSource(0)).counter_scale == 0.5


def test_window_rejects_non_power_of_two():
    with pytest.raises(ValueError, match="AllWindowSum"):
        WindowSum(6, 1.0, RandomSource(0))


def test_window_rejects_out_of_range_updates():
    w = WindowSum(4, 1.0, RandomSource(0))
    with pytest.raises(ValueError):
        w.push(1.5)
    with pytest.raises(ValueError):
        w.push(-0.1)


def test_window_size_one_reduces_to_noisy_item():
    w = WindowSum(1, 1.0, RandomSource(0), noisy=False)
    assert [w.push(x) for x in (0.3, 0.7, 0.0)] == [0.3, 0.7, 0.0]


def test_window_cross_block_trace():
    w = WindowSum(4, 1.0, RandomSource(0), noisy=False)
    outs = [w.push(float(x)) for x in (1, 0, 1, 1, 0, 1, 1)]
    assert outs == [1, 1, 2, 3, 2, 3, 3]
    assert outs[-1] == 3  # x4 + x5 + x6 + x7


def test_window_estimate_composes_block_counters():
    # at step 7 with W=4 the estimate must equal
    # c[1,4] - (c[1,2] + c[3,3]) + (c[5,6] + c[7,7]) over published values
    w = WindowSum(4, 1.0, RandomSource(5), noisy=True)
    xs = [1, 0, 1, 1, 0, 1, 1]
    est = None
    for x in xs:
        est = w.push(float(x))
    val = lambda l, u: sum(w.node(Interval(l, u)))
    assert est == pytest.approx(
        val(1, 4) - (val(1, 2) + val(3, 3)) + (val(5, 6) + val(7, 7)), abs=1e-12
    )


def test_window_saturates_on_ones():
    w = WindowSum(8, 1.0, RandomSource(0), noisy=False)
    outs = [w.push(1.0) for _ in range(40)]
    assert all(o == 8.0 for o in outs[8:])


def test_window_matches_brute_force_noiseless():
    for seed in range(5):
        xs = random_stream(seed, 200, binary=False)
        for W in (1, 4, 32):
            w = WindowSum(W, 1.0, RandomSource(seed), noisy=False)
            for j, x in enumerate(xs, 1):
                assert w.push(x) == pytest.approx(brute_window(xs, j, W), abs=1e-9)


def test_window_keeps_two_blocks():
    w = WindowSum(8, 1.0, RandomSource(1))
    for _ in range(100):
        w.push(1.0)
    blocks = w.counters()
    assert len(blocks) == 2
    assert all(len(arr) == 2 * 8 for arr in blocks.values())


# ---------------------------------------------------------------------------
# all-window / running sum


def test_allwindow_tree_doubles_with_stream():
    aw = AllWindowSum(1.0, RandomSource(0), noisy=False)
    for _ in range(3):
        aw.push(1.0)
    assert aw._tree.size == 4
    assert aw.counters()[(3, 0)] == 3.0  # root accumulator via carry + adds


def test_allwindow_level_budgets_sum_to_total():
    aw = AllWindowSum(1.0, RandomSource(0))
    sched = [aw.level_epsilon(k) for k in range(1, 60)]
    assert all(a > b for a, b in zip(sched, sched[1:]))
    assert sum(sched) < 1.0
    assert aw.level_epsilon(1) == pytest.approx(6.0 / math.pi**2, rel=1e-12)


def test_allwindow_query_examples():
    aw = AllWindowSum(1.0, RandomSource(0), noisy=False)
    for _ in range(8):
        aw.push(1.0)
    assert aw.query(8, 3) == pytest.approx(3.0, abs=1e-12)
    assert aw.query(8, 8) == pytest.approx(aw.running_sum(8), abs=1e-12)
    assert aw.query(5, 9) == pytest.approx(aw.running_sum(5), abs=1e-12)


def test_allwindow_query_matches_brute_force_all_windows():
    xs = random_stream(3, 128, binary=False)
    aw = AllWindowSum(1.0, RandomSource(3), noisy=False)
    gen = RandomSource(77)
    for j, x in enumerate(xs, 1):
        aw.push(x)
        for W in (1, 2, 5, 8, 13, int(gen.uniform() * j) + 1):
            assert aw.query(j, W) == pytest.approx(
                brute_window(xs, j, W), abs=1e-9
            ), (j, W)


def test_allwindow_query_validation():
    aw = AllWindowSum(1.0, RandomSource(0))
    aw.push(1.0)
    with pytest.raises(ValueError):
        aw.query(2, 1)  # beyond current step
    with pytest.raises(ValueError):
        aw.query(1, 0)
    with pytest.raises(ValueError):
        aw.push(2.0)


def test_running_sum_examples():
    r = RunningSum(1.0, RandomSource(0), noisy=False)
    assert [r.push(x) for x in (1.0, 0.0, 1.0)] == [1.0, 1.0, 2.0]
    assert r.query(0) == 0.0


def test_running_sum_matches_prefix_oracle():
    xs = random_stream(9, 256)
    r = RunningSum(1.0, RandomSource(9), noisy=False)
    prefix = 0.0
    for x in xs:
        prefix += x
        assert r.push(x) == pytest.approx(prefix, abs=1e-9)


def test_fixed_window_view_matches_oracle():
    xs = random_stream(4, 100, binary=False)
    v = FixedWindowView(5, 1.0, RandomSource(4), noisy=False)
    for j, x in enumerate(xs, 1):
        assert v.push(x) == pytest.approx(brute_window(xs, j, 5), abs=1e-9)


# ---------------------------------------------------------------------------
# exponential decay


def test_exp_requires_narrow_alpha():
    for alpha in (0.5, 2.0 / 3.0, 1.0, 1.2):
        with pytest.raises(ValueError):
            ExponentialSum(alpha, 1.0, RandomSource(0))


def test_exp_sensitivity_closed_form():
    expected = (1.0 / (0.9 * math.log(2))) * (
        math.log(2 * 0.9 / 0.1) + 0.5 + math.log(2)
    )
    assert exp_decay_sensitivity(0.9) == pytest.approx(expected, rel=1e-12)
    assert exp_decay_sensitivity(0.9) == pytest.approx(6.545858, abs=1e-5)
    expected99 = (1.0 / (0.99 * math.log(2))) * (
        math.log(2 * 0.99 / 0.01) + 0.5 + math.log(2)
    )
    assert exp_decay_sensitivity(0.99) == pytest.approx(expected99, rel=1e-12)
    assert exp_decay_sensitivity(0.9) < exp_decay_sensitivity(0.99)


def test_exp_trace_on_ones():
    m = ExponentialSum(0.75, 1.0, RandomSource(0), noisy=False)
    assert [m.push(1.0) for _ in range(3)] == [1.0, 1.75, 2.3125]


def test_exp_zero_stream_stays_zero():
    m = ExponentialSum(0.9, 1.0, RandomSource(0), noisy=False)
    assert all(m.push(0.0) == 0.0 for _ in range(50))


def test_exp_matches_brute_force_noiseless():
    for seed, alpha in [(0, 0.7), (1, 0.9), (2, 0.99)]:
        xs = random_stream(seed, 300, binary=False)
        m = ExponentialSum(alpha, 1.0, RandomSource(seed), noisy=False)
        for j, x in enumerate(xs, 1):
            assert m.push(x) == pytest.approx(brute_exp(xs, j, alpha), abs=1e-9)


def test_exp_eviction_keeps_one_node_per_level():
    m = ExponentialSum(0.9, 1.0, RandomSource(0))
    for i in range(1, 3000):
        m.push(1.0)
        assert all(n <= 1 for n in m.nodes_per_level().values())
    assert m.live_node_count() <= m._tree.height


def test_exp_eviction_does_not_change_outputs():
    xs = random_stream(8, 500)
    a = ExponentialSum(0.9, 1.0, RandomSource(8), noisy=False)
    b = ExponentialSum(0.9, 1.0, RandomSource(8), noisy=False, evict=False)
    for x in xs:
        assert a.push(x) == b.push(x)


# ---------------------------------------------------------------------------
# polynomial decay


def test_poly_sensitivity_closed_form():
    assert poly_decay_sensitivity(2.0, 0.5) == pytest.approx(4.0, rel=1e-12)
    assert poly_decay_sensitivity(4.0, 0.5) == pytest.approx(3.0, rel=1e-12)
    # the band-count term log2(1/(1-beta)) / (c beta^2) dominates and diverges
    # (logarithmically) as beta -> 1
    betas = [0.9, 1 - 1e-6, 1 - 2**-30, 1 - 2**-50]
    lams = [poly_decay_sensitivity(2.0, b) for b in betas]
    assert all(a < b for a, b in zip(lams, lams[1:]))
    assert lams[-1] > 20.0
    with pytest.raises(ValueError):
        poly_decay_sensitivity(1.0, 0.5)
    with pytest.raises(ValueError):
        poly_decay_sensitivity(2.0, 1.0)


def test_poly_breakpoints_power_case():
    # c=2, beta=0.75: thresholds (1-beta)^j = 4^-j give b(j) = 2^j - 1
    assert [poly_breakpoint(2.0, 0.75, j) for j in range(4)] == [0, 1, 3, 7]


def test_poly_child_windows():
    m = PolynomialSum(2.0, 0.75, 1.0, RandomSource(0), noisy=False)
    for _ in range(10):
        m.push(1.0)
    # age-0 estimator plus one estimator per nonempty band b(j-1) -> b(j)
    assert m.child_windows()[:4] == [1, 1, 2, 4]
    assert all(ch.win.counter_scale == m.counter_scale for ch in m._children)


def test_poly_sandwich_on_ones():
    m = PolynomialSum(2.0, 0.75, 1.0, RandomSource(0), noisy=False)
    outs = [m.push(1.0) for _ in range(3)]
    exact = brute_poly([1.0] * 3, 3, 2.0)
    assert exact == pytest.approx(1 + 1 / 4 + 1 / 9, rel=1e-12)
    assert (1 - 0.75) * exact - 1e-9 <= outs[-1] <= exact + 1e-9


def test_poly_noiseless_output_within_band_everywhere():
    for seed, (c, beta) in enumerate([(1.5, 0.25), (2.0, 0.5), (4.0, 0.25)]):
        xs = random_stream(seed, 300)
        m = PolynomialSum(c, beta, 1.0, RandomSource(seed), noisy=False)
        for j, x in enumerate(xs, 1):
            out = m.push(x)
            exact = brute_poly(xs, j, c)
            assert (1 - beta) * exact - 1e-9 <= out <= exact + 1e-9, (j, c, beta)


def test_poly_band_weights_reproduce_noiseless_output():
    # independent reconstruction: weight 1 at age 0 and (1-beta)^j on ages
    # (b(j-1), b(j)]
    c, beta = 2.0, 0.5

    def weight(age):
        if age == 0:
            return 1.0
        j = 1
        while poly_breakpoint(c, beta, j) < age:
            j += 1
        return (1.0 - beta) ** j

    xs = random_stream(42, 120)
    m = PolynomialSum(c, beta, 1.0, RandomSource(42), noisy=False)
    for j, x in enumerate(xs, 1):
        out = m.push(x)
        recon = sum(xs[i] * weight(j - 1 - i) for i in range(j))
        assert out == pytest.approx(recon, abs=1e-9)


# ---------------------------------------------------------------------------
# unbiasedness (noise on)


def _window_sigma_at(j, W, eps):
    # number of published terms at step j: block-k prefix plus (if partial)
    # previous block total and prefix
    p = j - ((j - 1) // W) * W
    terms = bin(p).count("1")
    if j > W and p != W:
        terms += bin(p).count("1") + bin(W).count("1")
    scale = (math.log2(W) + 1.0) / eps
    return scale * math.sqrt(2.0 * terms)


def test_window_estimates_unbiased():
    W, j_star, trials = 8, 12, 20000
    xs = random_stream(5, j_star)
    exact = brute_window(xs, j_star, W)
    base = RandomSource(17)
    errs = np.empty(trials)
    for t in range(trials):
        w = WindowSum(W, 1.0, base.child(t))
        for x in xs:
            est = w.push(x)
        errs[t] = est - exact
    se = _window_sigma_at(j_star, W, 1.0) / math.sqrt(trials)
    assert abs(errs.mean()) < 5.0 * se


def test_exp_estimates_unbiased():
    alpha, j_star, trials = 0.75, 10, 20000
    xs = random_stream(6, j_star)
    exact = brute_exp(xs, j_star, alpha)
    # theoretical sigma from the tiling of [1, j]: weights alpha^(j - right)
    probe = ExponentialSum(alpha, 1.0, RandomSource(0), noisy=False)
    for x in xs:
        probe.push(x)
    weights = [
        alpha ** (j_star - right)
        for _, _, right in probe._tree.decompose_nodes(j_star)
    ]
    sigma = probe.counter_scale * math.sqrt(2.0 * sum(w * w for w in weights))
    base = RandomSource(18)
    errs = np.empty(trials)
    for t in range(trials):
        m = ExponentialSum(alpha, 1.0, base.child(t))
        for x in xs:
            est = m.push(x)
        errs[t] = est - exact
    assert abs(errs.mean()) < 5.0 * sigma / math.sqrt(trials)


def test_poly_estimates_unbiased_for_band_target():
    c, beta, j_star, trials = 2.0, 0.5, 9, 20000
    xs = random_stream(7, j_star)
    ref = PolynomialSum(c, beta, 1.0, RandomSource(0), noisy=False)
    for x in xs:
        target = ref.push(x)  # the banded approximant F'
    n_counters = sum(
        bin(j - ((j - 1) // ch.win.W) * ch.win.W).count("1") * 2 + 1
        for ch in ref._children
        for j in [max(1, j_star - ch.lag)]
    )
    sigma = ref.counter_scale * math.sqrt(2.0 * n_counters)  # upper bound
    base = RandomSource(19)
    errs = np.empty(trials)
    for t in range(trials):
        m = PolynomialSum(c, beta, 1.0, base.child(t))
        for x in xs:
            est = m.push(x)
        errs[t] = est - target
    assert abs(errs.mean()) < 5.0 * sigma / math.sqrt(trials)


# ---------------------------------------------------------------------------
# estimates only read counters frozen by their step


def test_estimate_terms_end_at_or_before_step():
    aw = AllWindowSum(1.0, RandomSource(0), noisy=False)
    gen = RandomSource(55)
    for j in range(1, 200):
        aw.push(1.0)
        tree = aw._tree
        assert all(right <= j for _, _, right in tree.decompose_nodes(j))
        W = int(gen.uniform() * j) + 1
        Wp = 1 << (W - 1).bit_length()
        k = -(-j // Wp)
        for _, _, right in tree.decompose_nodes(j, base=(k - 1) * Wp + 1):
            assert right <= j


# ---------------------------------------------------------------------------
# factory


def test_factory_routes_window_sizes():
    assert isinstance(
        make_mechanism(DecaySpec.window(8), 1.0, RandomSource(0)), WindowSum
    )
    assert isinstance(
        make_mechanism(DecaySpec.window(6), 1.0, RandomSource(0)), FixedWindowView
    )
    assert isinstance(
        make_mechanism(DecaySpec.exponential(0.9), 1.0, RandomSource(0)),
        ExponentialSum,
    )
    assert isinstance(
        make_mechanism(DecaySpec.polynomial(2.0, 0.5), 1.0, RandomSource(0)),
        PolynomialSum,
    )
    assert isinstance(
        make_mechanism(DecaySpec.running(), 1.0, RandomSource(0)), RunningSum
    )


def test_factory_accepts_budget_with_schedule():
    from decaystream.noise import level_epsilons

    budget = PrivacyBudget(
        1.0, gamma=0.05, level_schedule=tuple(level_epsilons(1.0, 2.0, 32))
    )
    mech = make_mechanism(DecaySpec.running(), budget, RandomSource(0), noisy=False)
    for x in (1.0, 0.0, 1.0):
        out = mech.push(x)
    assert out == 2.0


def test_decay_spec_validation_and_weights():
    with pytest.raises(ValueError):
        DecaySpec.window(0)
    with pytest.raises(ValueError):
        DecaySpec.exponential(1.0)
    with pytest.raises(ValueError):
        DecaySpec.polynomial(0.5, 0.5)
    with pytest.raises(ValueError):
        DecaySpec("nonsense")
    w = DecaySpec.window(3)
    assert [w.weight(a) for a in range(4)] == [1.0, 1.0, 1.0, 0.0]
    assert DecaySpec.exponential(0.5).weight(2) == 0.25
    assert DecaySpec.polynomial(2.0, 0.5).weight(2) == pytest.approx(1 / 9)
    assert DecaySpec.running().cumulative(7) == 7.0
    assert DecaySpec.window(3).cumulative(10) == 3.0
