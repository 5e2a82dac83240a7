import itertools
import math

import numpy as np
import pytest
from scipy.linalg import expm, null_space
from scipy import stats

from jumpcurv.jump_process import (
    BirthDeathRates,
    Generator,
    ModelError,
    NonErgodicError,
    TruncationError,
    build_product_chain,
    check_ergodicity,
    hypercube,
    hypercube_kernel,
    rate_matrix,
    semigroup_rows,
    stationary_distribution,
    stationary_measure,
)
from jumpcurv.simulate import mminf_exact_law, total_variation


def test_mminf_stationary_is_poisson():
    sm = stationary_measure(BirthDeathRates.mm_infinity(1.0, 1.0))
    assert sm.probs[0] == pytest.approx(math.exp(-1), rel=1e-12)
    np.testing.assert_allclose(sm.probs, stats.poisson.pmf(np.arange(len(sm.probs)), 1.0), rtol=1e-12, atol=1e-16)


def test_constant_rates_give_geometric_law():
    sm = stationary_measure(BirthDeathRates.constant(1.0, 2.0))
    xs = np.arange(len(sm.probs))
    np.testing.assert_allclose(sm.probs, 0.5**xs * 0.5, rtol=1e-12, atol=1e-18)


@pytest.mark.parametrize("rates", [
    BirthDeathRates.mm_infinity(3.0, 0.5),
    BirthDeathRates.constant(1.0, 3.0),
    BirthDeathRates.from_tables([1, 2, 3], [0, 4, 5, 6], ("constant", 2.0), ("linear", 1.5)),
])
def test_stationary_normalized_and_detailed_balance(rates):
    sm = stationary_measure(rates, tol=1e-13)
    assert 1 - 1e-13 <= sm.probs.sum() <= 1 + 1e-13
    xs = np.arange(len(sm.probs) - 1)
    lhs = rates.birth(xs) * sm.probs[:-1]
    rhs = rates.death(xs + 1) * sm.probs[1:]
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-300)


def test_log_space_handles_extreme_rates():
    sm = stationary_measure(BirthDeathRates.mm_infinity(300.0, 1.0))
    assert np.all(np.isfinite(sm.probs))
    assert sm.probs.sum() == pytest.approx(1.0)
    assert int(np.argmax(sm.probs)) in (299, 300)


def test_ergodicity_verdicts():
    assert check_ergodicity(BirthDeathRates.mm_infinity(2.0, 0.3)).verdict == "ergodic"
    assert check_ergodicity(BirthDeathRates.constant(2.0, 1.0)).verdict == "transient-suspect"
    assert check_ergodicity(BirthDeathRates.constant(1.0, 1.0)).verdict == "transient-suspect"
    assert check_ergodicity(BirthDeathRates.constant(1.0, 2.0)).verdict == "ergodic"


def test_ergodicity_horizon_floor():
    with pytest.raises(ModelError):
        check_ergodicity(BirthDeathRates.constant(1.0, 2.0), horizon=5)


def test_nonergodic_measure_rejected():
    with pytest.raises(NonErgodicError):
        stationary_measure(BirthDeathRates.constant(2.0, 1.0))


def test_birth_death_invariants_enforced():
    with pytest.raises(ModelError):
        BirthDeathRates.from_tables([1.0, 0.0], [0.0, 1.0, 1.0], ("constant", 1.0), ("constant", 1.0))
    with pytest.raises(ModelError):
        Generator({0: ((0, 1.0),)})
    with pytest.raises(ModelError):
        Generator({0: ((1, -1.0),)})


def test_hypercube_kernel_trivial_cases():
    assert hypercube_kernel(3, 0.0, (0, 1, 0), (0, 1, 0)) == 1.0
    assert hypercube_kernel(3, 0.0, (0, 1, 0), (1, 1, 0)) == 0.0
    assert hypercube_kernel(1, 1e3, (0,), (1,)) == pytest.approx(0.5)
    assert hypercube_kernel(1, 1e3, (0,), (0,)) == pytest.approx(0.5)


def test_hypercube_kernel_two_state_matrix_exponential():
    Q = np.array([[-0.5, 0.5], [0.5, -0.5]])
    P = expm(Q)
    assert hypercube_kernel(1, 1.0, (0,), (0,)) == pytest.approx(P[0, 0], abs=1e-15)
    assert P[0, 0] == pytest.approx((1 + math.exp(-1)) / 2, abs=1e-15)


def test_semigroup_at_zero_is_identity():
    chain = hypercube(2)
    rows = semigroup_rows(chain, 0.0).rows
    np.testing.assert_array_equal(rows, np.eye(4))


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
def test_semigroup_matches_hypercube_kernel(N):
    chain = hypercube(N)
    states = chain.states
    for t in (0.1, 1.0, 5.0):
        rows = semigroup_rows(chain, t, tol=1e-14).rows
        exact = np.array([[hypercube_kernel(N, t, x, y) for y in states] for x in states])
        assert np.max(np.abs(rows - exact)) <= 1e-10


def test_semigroup_matches_mehler_law():
    rates = BirthDeathRates.mm_infinity(1.0, 1.0)
    res = semigroup_rows(rates, 1.0, states=[3], truncation=range(60), tol=1e-13)
    law, tail = mminf_exact_law(3, 1.0, 1.0, 1.0, 59)
    assert tail < 1e-15
    assert total_variation(res.rows[0], law) <= 1e-8


def test_semigroup_truncation_too_small():
    rates = BirthDeathRates.mm_infinity(5.0, 1.0)
    with pytest.raises(TruncationError) as info:
        semigroup_rows(rates, 2.0, states=[0], truncation=range(4), tol=1e-10)
    assert info.value.suggested_size == 8


def test_semigroup_rows_sum_and_chapman_kolmogorov():
    rng = np.random.default_rng(11)
    Q = rng.uniform(0, 2, (6, 6))
    np.fill_diagonal(Q, 0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    gen = Generator.from_matrix(Q)
    tol = 1e-12
    Pt = semigroup_rows(gen, 0.7, tol=tol).rows
    Ps = semigroup_rows(gen, 0.4, tol=tol).rows
    Pts = semigroup_rows(gen, 1.1, tol=tol).rows
    assert np.all(Pt.sum(axis=1) >= 1 - tol) and np.all(Pt.sum(axis=1) <= 1 + 1e-13)
    assert np.max(np.abs(Pt @ Ps - Pts)) <= 10 * tol
    np.testing.assert_allclose(Pts, expm(1.1 * Q), atol=1e-11)


def test_generator_is_derivative_at_zero():
    # Richardson extrapolation of (P_t - I)/t towards the generator
    rng = np.random.default_rng(5)
    Q = rng.uniform(0, 1, (5, 5))
    np.fill_diagonal(Q, 0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    gen = Generator.from_matrix(Q)
    f = rng.normal(size=5)
    h = 1e-3
    d1 = (semigroup_rows(gen, h, tol=1e-15).rows @ f - f) / h
    d2 = (semigroup_rows(gen, h / 2, tol=1e-15).rows @ f - f) / (h / 2)
    richardson = 2 * d2 - d1
    err_plain = np.max(np.abs(d2 - Q @ f))
    err_rich = np.max(np.abs(richardson - Q @ f))
    assert err_rich <= 1e-5
    assert err_rich < err_plain / 50


def test_stationarity_of_semigroup():
    rates = BirthDeathRates.mm_infinity(2.0, 1.0).truncate(40)
    pi = stationary_distribution(rates)
    rows = semigroup_rows(rates, 1.3, tol=1e-13).rows
    np.testing.assert_allclose(pi @ rows, pi, atol=1e-12)


def test_product_chain_dimension_one_is_component():
    comp = BirthDeathRates.two_state(0.5, 0.5)
    assert build_product_chain(comp, 1) is comp


def test_product_chain_rates_are_scaled():
    chain = build_product_chain(BirthDeathRates.two_state(0.5, 0.5), 3)
    jumps = dict(chain.jumps((0, 1, 0)))
    assert jumps == {(1, 1, 0): 0.5 / 3, (0, 0, 0): 0.5 / 3, (0, 1, 1): 0.5 / 3}


def test_product_stationary_is_product_measure():
    a = BirthDeathRates.two_state(0.3, 1.1)
    b = BirthDeathRates.two_state(2.0, 0.7)
    chain = build_product_chain([a, b], 2)
    # oracle: hand-built 4-state generator and its null space
    states = [(0, 0), (0, 1), (1, 0), (1, 1)]
    Q = np.zeros((4, 4))
    idx = {s: i for i, s in enumerate(states)}
    for (x1, x2) in states:
        i = idx[(x1, x2)]
        Q[i, idx[(1 - x1, x2)]] = (0.3 if x1 == 0 else 1.1) / 2
        Q[i, idx[(x1, 1 - x2)]] = (2.0 if x2 == 0 else 0.7) / 2
        Q[i, i] = -Q[i].sum()
    v = null_space(Q.T)[:, 0]
    v = v / v.sum()
    pa = np.array([1.1, 0.3]) / 1.4
    pb = np.array([0.7, 2.0]) / 2.7
    prod = np.array([pa[x1] * pb[x2] for x1, x2 in states])
    np.testing.assert_allclose(v, prod, atol=1e-10)
    pi = stationary_distribution(chain, states)
    np.testing.assert_allclose(pi, prod, atol=1e-10)


def test_hypercube_product_matches_kernel():
    chain = build_product_chain(BirthDeathRates.two_state(0.5, 0.5), 3)
    rows = semigroup_rows(chain, 2.0, tol=1e-14).rows
    states = chain.states
    exact = np.array([[hypercube_kernel(3, 2.0, x, y) for y in states] for x in states])
    assert np.max(np.abs(rows - exact)) <= 1e-10


def test_rate_matrix_leak():
    Q, leak = rate_matrix(BirthDeathRates.mm_infinity(1.0, 1.0), range(3))
    assert leak.tolist() == [0.0, 0.0, 1.0]
    assert Q[2, 2] == -3.0
