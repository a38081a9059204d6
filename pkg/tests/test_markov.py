import math

import numpy as np
import pytest

from milestoning.errors import UnreachableProductError
from milestoning.markov import (
    DiscreteChain,
    aperiodicity_gcd,
    cesaro_average,
    expected_visits,
    geometric_bound_certificate,
    golden_three_state,
    invariant_mu_visits,
    level_chain,
    mfpt_check,
    neumann_partial,
    random_chain,
    semi_markov_occupancy,
    sigma_distribution,
    tv_distance,
)
from milestoning.sde import RngStream


def two_state_chain():
    # R -> P with certainty, P restarts at R; unit jump time on R
    K = np.array([[0.0, 1.0], [1.0, 0.0]])
    return DiscreteChain(K, np.array([1.0, 0.0]), reactant=0, product=1,
                         rho=np.array([1.0, 0.0]))


class TestInvariantMu:
    def test_two_state(self):
        mu = invariant_mu_visits(two_state_chain())
        assert np.allclose(mu, [0.5, 0.5], atol=1e-14)

    def test_golden_three_state(self):
        chain = golden_three_state()
        mu = invariant_mu_visits(chain)
        assert np.allclose(mu, [0.4, 0.4, 0.2], atol=1e-12)
        # nu(M) = E[sigma_P] + 1 = 5
        assert expected_visits(chain).sum() == pytest.approx(5.0, abs=1e-12)

    def test_invariance_on_random_chains(self):
        rng = np.random.default_rng(100)
        for _ in range(20):
            chain = random_chain(rng)
            mu = invariant_mu_visits(chain)
            assert np.max(np.abs(mu @ chain.K - mu)) <= 1e-12
            assert mu.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(mu >= 0)

    def test_unreachable_product_rejected(self):
        K = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(UnreachableProductError):
            DiscreteChain(K, np.array([1.0, 1.0, 0.0]), 0, 2, np.array([1.0, 0.0, 0.0]))


class TestNeumann:
    def test_three_state_n1(self):
        chain = golden_three_state()
        partial, tv_err, bound = neumann_partial(chain, 1)
        assert np.allclose(partial, [0.2, 0.0, 0.0], atol=1e-14)
        # exact l1 gap is 4/5, halved by the TV convention; bound is the
        # printed (unhalved) tail sum
        assert tv_err == pytest.approx(0.4, abs=1e-12)
        assert bound == pytest.approx(0.8, abs=1e-12)

    def test_domination_and_monotonicity(self):
        chain = golden_three_state()
        prev = math.inf
        for n in range(1, 51):
            _, tv_err, bound = neumann_partial(chain, n)
            assert tv_err <= bound + 1e-12
            assert tv_err <= prev + 1e-15
            prev = tv_err
        assert prev < 1e-3

    def test_random_chains(self):
        rng = np.random.default_rng(200)
        for _ in range(10):
            chain = random_chain(rng)
            mu = invariant_mu_visits(chain)
            prev = math.inf
            for n in range(1, 51):
                partial, tv_err, bound = neumann_partial(chain, n)
                assert tv_err <= bound + 1e-12
                assert tv_err <= prev + 1e-15
                prev = tv_err
                assert np.all(partial <= mu + 1e-13)


class TestMfptIdentity:
    def test_two_state(self):
        direct, milestoning = mfpt_check(two_state_chain())
        assert direct == pytest.approx(1.0, abs=1e-14)
        assert milestoning == pytest.approx(1.0, abs=1e-14)

    def test_golden_three_state(self):
        direct, milestoning = mfpt_check(golden_three_state())
        assert direct == pytest.approx(4.0, abs=1e-12)
        assert milestoning == pytest.approx(4.0, abs=1e-12)

    def test_random_chains_agree(self):
        rng = np.random.default_rng(300)
        for _ in range(20):
            chain = random_chain(rng)
            direct, milestoning = mfpt_check(chain)
            assert abs(direct - milestoning) <= 1e-10 * abs(direct)


class TestAperiodicity:
    def test_parity_law(self):
        for m in range(3, 10):
            g = aperiodicity_gcd(level_chain(m), horizon=4 * m)
            assert g == (1 if m % 2 == 1 else 2), f"m={m}"

    def test_parity_law_biased_walk(self):
        for m in (4, 5):
            g = aperiodicity_gcd(level_chain(m, q=0.3), horizon=4 * m)
            assert g == (1 if m % 2 == 1 else 2)

    def test_three_state_support(self):
        chain = golden_three_state()
        assert aperiodicity_gcd(chain, horizon=12) == 1
        probs = sigma_distribution(chain, 8)
        support = {i for i, p in enumerate(probs) if p > 1e-14}
        assert support == {2, 4, 6}  # sigma_P in {2, 4, 6, ...}

    def test_empty_support_raises(self):
        with pytest.raises(UnreachableProductError):
            aperiodicity_gcd(golden_three_state(), horizon=2)


class TestGeometricBound:
    def test_three_state_certificate(self):
        chain = golden_three_state()
        cert = geometric_bound_certificate(chain, N=6)
        assert cert.satisfied and cert.lam > 0
        for n in range(61):
            assert cert.empirical(n) <= cert.bound(n) + 1e-12

    def test_lambda_zero_signals(self):
        cert = geometric_bound_certificate(golden_three_state(), N=1)
        assert not cert.satisfied  # J_0 cannot start in P under rho
        with pytest.raises(ValueError):
            cert.bound(3)

    def test_periodic_chain_never_satisfies(self):
        chain = level_chain(4)
        for N in range(1, 21):
            assert not geometric_bound_certificate(chain, N).satisfied

    def test_empirical_decays_to_zero(self):
        cert = geometric_bound_certificate(golden_three_state(), N=6)
        assert cert.empirical(60) < 1e-4


class TestCesaro:
    def test_constant_function(self):
        val = cesaro_average(golden_three_state(), [1.0, 1.0, 1.0], 1000,
                             RngStream(1, 1))
        assert val == 1.0

    def test_three_state_occupancy(self):
        chain = golden_three_state()
        n = 1_000_000
        val = cesaro_average(chain, [1.0, 0.0, 0.0], n, RngStream(1, 2))
        # cycles have length 3-ish; s.e. of the mean of ~n/3 cycle averages
        se = 3.0 / math.sqrt(n)
        assert abs(val - 0.4) < 3 * se

    def test_periodic_chain_converges_in_cesaro(self):
        chain = level_chain(4)
        mu = invariant_mu_visits(chain)
        n = 400_000
        val = cesaro_average(chain, [0.0, 0.0, 0.0, 1.0], n, RngStream(1, 3))
        se = 3.0 / math.sqrt(n)
        assert abs(val - mu[3]) < 3 * se


class TestSemiMarkov:
    def test_three_state(self):
        occ = semi_markov_occupancy(golden_three_state())
        assert np.allclose(occ, [0.5, 0.5, 0.0], atol=1e-13)

    def test_single_positive_time(self):
        K = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])
        chain = DiscreteChain(K, np.array([0.0, 2.0, 0.0]), 0, 2,
                              np.array([1.0, 0.0, 0.0]))
        occ = semi_markov_occupancy(chain)
        assert np.allclose(occ, [0.0, 1.0, 0.0])

    def test_time_scaling_invariance(self):
        rng = np.random.default_rng(7)
        chain = random_chain(rng)
        occ1 = semi_markov_occupancy(chain)
        scaled = DiscreteChain(chain.K, 3.7 * chain.jump_time_means,
                               chain.reactant, chain.product, chain.rho)
        assert np.allclose(occ1, semi_markov_occupancy(scaled), atol=1e-14)

    def test_all_zero_times_raise(self):
        with pytest.raises(ValueError):
            semi_markov_occupancy(DiscreteChain(
                two_state_chain().K, np.zeros(2), 0, 1, np.array([1.0, 0.0])))


class TestValidation:
    def test_non_stochastic_row(self):
        K = np.array([[0.0, 0.9], [1.0, 0.0]])
        with pytest.raises(ValueError):
            DiscreteChain(K, np.array([1.0, 0.0]), 0, 1, np.array([1.0, 0.0]))

    def test_product_row_must_restart(self):
        K = np.array([[0.0, 1.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            DiscreteChain(K, np.array([1.0, 0.0]), 0, 1, np.array([1.0, 0.0]))

    def test_product_time_must_be_zero(self):
        K = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            DiscreteChain(K, np.array([1.0, 1.0]), 0, 1, np.array([1.0, 0.0]))

    def test_tv_distance_convention(self):
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
        assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
