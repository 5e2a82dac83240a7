import math

import numpy as np
import pytest
from scipy import stats

from jumpcurv.jump_process import BirthDeathRates, Generator, hypercube, semigroup_rows, stationary_measure
from jumpcurv.simulate import (
    ExplosionSuspect,
    PathRecord,
    clopper_pearson_upper,
    empirical_laplace,
    empirical_law,
    empirical_mean,
    estimate_tail,
    mminf_exact_law,
    riemann_mean,
    run_replicas,
    simulate_path,
    total_variation,
)


def test_absorbing_state_has_no_jumps():
    gen = Generator({0: (), 1: ((0, 1.0),)})
    path = simulate_path(gen, 0, 10.0, seed=1)
    assert len(path.times) == 0 and path.final_state == 0
    assert empirical_mean(path, lambda x: 3.0 + x) == 3.0


def test_jump_count_of_constant_rate_chain():
    chain = BirthDeathRates.two_state(1.0, 1.0)
    counts = np.array([len(simulate_path(chain, 0, 10.0, seed=np.random.default_rng(i)).times) for i in range(10_000)])
    # Poisson(10) oracle for the jump count
    se = math.sqrt(10.0 / len(counts))
    assert abs(counts.mean() - 10.0) <= 3 * se
    assert counts.var() == pytest.approx(10.0, rel=0.05)


def test_birth_death_paths_move_by_one():
    rates = BirthDeathRates.from_tables([2, 1, 3], [0, 1, 4], ("constant", 2.0), ("linear", 1.0))
    for seed in range(20):
        path = simulate_path(rates, 5, 20.0, seed)
        seq = np.array((path.x0,) + path.states)
        assert np.all(np.abs(np.diff(seq)) == 1)
        assert np.all(np.diff(path.times) > 0) and (len(path.times) == 0 or path.times[-1] <= 20.0)


def test_path_is_reproducible():
    rates = BirthDeathRates.mm_infinity(3.0, 1.0)
    a = simulate_path(rates, 0, 15.0, seed=42)
    b = simulate_path(rates, 0, 15.0, seed=42)
    assert np.array_equal(a.times, b.times) and a.states == b.states


def test_empirical_mean_is_exact_for_one_jump():
    path = PathRecord(2, np.array([5.0]), (7,), 10.0)
    assert empirical_mean(path, lambda x: x * x) == pytest.approx((4 + 49) / 2)
    assert path.state_at(4.999) == 2 and path.state_at(5.0) == 7


def test_riemann_sums_converge_to_path_integral():
    rates = BirthDeathRates.mm_infinity(2.0, 1.0)
    phi = math.sqrt
    for seed in range(5):
        path = simulate_path(rates, 1, 10.0, seed)
        exact = empirical_mean(path, phi)
        errors = [abs(riemann_mean(path, phi, 2**k) - exact) for k in (10, 12, 14)]
        # a piecewise-constant path with J jumps has Riemann error at most J * sup|phi| * t / n / t
        J = len(path.times)
        bound = 2 * J * math.sqrt(max((path.x0,) + path.states)) / 2**14
        assert errors[-1] <= bound + 1e-12
        assert errors[-1] <= errors[0] + 1e-12


def test_holding_times_are_exponential():
    rates = BirthDeathRates.mm_infinity(2.0, 1.0)
    holds = {}
    for seed in range(400):
        path = simulate_path(rates, 2, 60.0, seed)
        seq = (path.x0,) + path.states
        edges = np.concatenate(([0.0], path.times))
        for x, d in zip(seq[:-1], np.diff(edges)):
            holds.setdefault(x, []).append(d)
    for x in (1, 2, 3):
        sample = np.asarray(holds[x][:10_000])
        assert len(sample) == 10_000
        rate = rates.total_rate(x)
        assert stats.kstest(sample, "expon", args=(0, 1 / rate)).pvalue > 0.01


def test_explosion_guard():
    rates = BirthDeathRates.constant(1.0, 1.0)
    with pytest.raises(ExplosionSuspect):
        simulate_path(rates, 0, 1e6, seed=0, max_jumps=1000)


def test_constant_observable_has_no_deviation():
    rates = BirthDeathRates.mm_infinity(1.0, 1.0)
    est = estimate_tail(rates, lambda x: 2.5, 2.5, 0, 5.0, [0.1, 1.0], 200, seed=3)
    assert est.counts.tolist() == [0, 0]
    assert np.all(est.upper >= est.estimate)


def test_tail_counts_vanish_beyond_range():
    chain = BirthDeathRates.two_state(0.5, 0.5)
    est = estimate_tail(chain, float, 0.5, 0, 3.0, [0.1, 0.3, 0.6], 500, seed=9)
    assert est.counts[-1] == 0
    assert np.all(np.diff(est.counts) <= 0)
    assert np.all(est.upper >= est.estimate)


def test_estimate_tail_needs_replicas():
    with pytest.raises(ValueError):
        estimate_tail(hypercube(1), float, 0.0, (0,), 1.0, [0.1], 10)


def test_clopper_pearson_matches_beta_quantile():
    n, alpha = 1000, 0.01
    for k in (0, 1, 17, 999):
        assert clopper_pearson_upper(k, n, alpha) == pytest.approx(stats.beta.ppf(1 - alpha, k + 1, n - k))
    assert clopper_pearson_upper(0, n, alpha) == pytest.approx(1 - alpha ** (1 / n))
    assert clopper_pearson_upper(n, n, alpha) == 1.0


def test_run_replicas_worker_invariance():
    rates = BirthDeathRates.mm_infinity(1.0, 1.0)
    a = run_replicas(rates, 0, 5.0, 400, 11, math.sqrt, workers=1)
    b = run_replicas(rates, 0, 5.0, 400, 11, math.sqrt, workers=3)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_laplace_trivial_cases():
    chain = BirthDeathRates.two_state(0.5, 0.5)
    est = empirical_laplace(chain, lambda x: 4.0, 0, 1.0, [0.5, 2.0], 300, seed=1, n_boot=100)
    np.testing.assert_allclose(est.estimate, 1.0)
    est = empirical_laplace(chain, float, 0, 1.0, [1e-9], 300, seed=1, n_boot=100)
    assert est.estimate[0] == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        empirical_laplace(chain, float, 0, 1.0, [0.0], 300)


def test_laplace_overflow_guard():
    values = np.array([0.0, 1000.0])
    est = empirical_laplace(None, float, 0, 1.0, [0.1, 5.0], 2, values=values, n_boot=10)
    assert est.rejected == (5.0,)
    assert est.tau.tolist() == [0.1]


def test_two_state_laplace_against_exact_mgf():
    # exact oracle from the semigroup row: X_t in {0,1} with P(X_t = 1) = p
    chain = BirthDeathRates.two_state(0.5, 0.5)
    t = 0.7
    p = semigroup_rows(chain, t, tol=1e-15).rows[0, 1]
    est = empirical_laplace(chain, float, 0, t, [0.5, 1.0, 2.0], 20_000, seed=5, n_boot=200)
    for tau, lo, hi in zip(est.tau, est.lower, est.upper):
        exact = (1 - p) * math.exp(-tau * p) + p * math.exp(tau * (1 - p))
        assert lo - 1e-3 <= exact <= hi + 1e-3


def test_mehler_law_start_at_zero_is_poisson():
    law, tail = mminf_exact_law(0, 2.0, 1.5, 1.0, 60)
    np.testing.assert_allclose(law, stats.poisson.pmf(np.arange(61), 1.5 * (1 - math.exp(-2.0))), atol=1e-15)
    assert tail < 1e-15


def test_mehler_law_long_time_is_stationary():
    law, _ = mminf_exact_law(7, 60.0, 2.0, 1.0, 60)
    np.testing.assert_allclose(law, stats.poisson.pmf(np.arange(61), 2.0), atol=1e-12)


def test_mehler_law_mean():
    law, _ = mminf_exact_law(3, 1.0, 1.0, 1.0, 80)
    assert np.dot(np.arange(81), law) == pytest.approx(3 * math.exp(-1) + 1 - math.exp(-1), rel=1e-12)


def test_ssa_law_matches_mehler_small():
    rates = BirthDeathRates.mm_infinity(1.0, 1.0)
    _, finals = run_replicas(rates, 3, 1.0, 20_000, 4)
    law, _ = mminf_exact_law(3, 1.0, 1.0, 1.0, 40)
    assert total_variation(empirical_law(finals, 41), law) <= 0.03


@pytest.mark.slow
def test_ergodic_mean_bias_shrinks():
    rates = BirthDeathRates.mm_infinity(1.0, 1.0)
    sm = stationary_measure(rates)
    pi_phi = float(np.dot(np.sqrt(np.arange(len(sm.probs))), sm.probs))
    biases = []
    for t, R in [(1.0, 4000), (10.0, 4000), (100.0, 1000)]:
        means, _ = run_replicas(rates, 0, t, R, 77, math.sqrt)
        se = means.std(ddof=1) / math.sqrt(R)
        biases.append((abs(means.mean() - pi_phi), se))
    assert biases[0][0] > biases[1][0] + 3 * biases[1][1]
    assert biases[2][0] <= biases[1][0] + 3 * (biases[1][1] + biases[2][1])
