import math

import numpy as np
import pytest

from skillscape import (
    choice_probabilities,
    college_value,
    effective_wage,
    market_potential,
    simplified_effective_wage,
    unskilled_value,
)


def logit_inputs(omega, theta=1.0, lam=0.0, C=None):
    """Zeroed prices/amenities so the utility argument equals omega."""
    C = omega.shape[2] if C is None else C
    zeros = np.zeros(C)
    return dict(omega=omega, p_n=zeros, p_h=zeros, a=zeros,
                d=np.zeros((omega.shape[0], C)), taste=np.ones_like(omega),
                theta=theta, lam=lam)


class TestEffectiveWage:
    def test_college_hand_value(self):
        assert effective_wage(50.0, 2.0, 2.0, 10.0, 0.0, True) == 38.0

    def test_non_college_branch_ignores_wage_inputs(self):
        assert effective_wage(999.0, 5.0, 7.0, 10.0, 30.0, False) == 30.0

    def test_unlearnable_option_is_minus_inf(self):
        assert effective_wage(50.0, 2.0, np.inf, 10.0, 0.0, True) == -np.inf


class TestSimplifiedEffectiveWage:
    def test_hand_value(self):
        got = simplified_effective_wage(
            rho=60.0, h=1.0, delta_dest=0.25, gamma_agg=0.22, sigma2_tilde=0.0,
            zeta_tilde=1.0, gamma_sig=0.61, tau=0.0, delta_origin=0.25,
            is_origin=True)
        want = 60.0 * 0.25 ** 0.22 - 0.25 ** -0.61
        assert got == pytest.approx(want, abs=1e-12)

    def test_attenuation_off_makes_origin_flag_irrelevant(self):
        kwargs = dict(rho=55.0, h=1.1, delta_dest=0.3, gamma_agg=0.22,
                      sigma2_tilde=0.2, zeta_tilde=1.5, gamma_sig=0.61,
                      tau=0.0, delta_origin=0.2)
        assert simplified_effective_wage(is_origin=True, **kwargs) == \
            simplified_effective_wage(is_origin=False, **kwargs)

    def test_no_local_signal_is_minus_inf(self):
        got = simplified_effective_wage(60.0, 1.0, 0.25, 0.22, 0.0, 1.0, 0.61,
                                        0.0, 0.0, True)
        assert got == -np.inf

    def test_penalty_uses_origin_fraction(self):
        low = simplified_effective_wage(60.0, 1.0, 0.25, 0.22, 0.0, 1.0, 0.61,
                                        0.0, 0.1, True)
        high = simplified_effective_wage(60.0, 1.0, 0.25, 0.22, 0.0, 1.0, 0.61,
                                         0.0, 0.4, True)
        assert low < high


class TestChoiceProbabilities:
    def test_two_identical_cities_one_major(self):
        omega = np.full((2, 1, 2), 3.0)
        p = choice_probabilities(**logit_inputs(omega, theta=1.5))
        np.testing.assert_allclose(p, 0.5)

    def test_binary_logit_hand_value(self):
        omega = np.array([[[0.0, math.log(3.0)]]])
        p = choice_probabilities(**logit_inputs(omega))
        np.testing.assert_allclose(p[0, 0], [0.25, 0.75], atol=1e-14)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        omega = rng.normal(size=(4, 3, 4))
        p = choice_probabilities(**logit_inputs(omega, theta=2.0))
        np.testing.assert_allclose(p.reshape(4, -1).sum(axis=1), 1.0,
                                   atol=1e-12)

    def test_sentinel_cells_get_exactly_zero(self):
        omega = np.zeros((1, 1, 3))
        omega[0, 0, 1] = -np.inf
        p = choice_probabilities(**logit_inputs(omega))
        assert p[0, 0, 1] == 0.0
        np.testing.assert_allclose(p.sum(), 1.0, atol=1e-14)

    def test_all_infeasible_origin_is_an_error(self):
        omega = np.full((1, 1, 2), -np.inf)
        with pytest.raises(ValueError, match="no feasible option"):
            choice_probabilities(**logit_inputs(omega))

    def test_constant_shift_of_one_origin(self):
        rng = np.random.default_rng(5)
        omega = rng.normal(size=(3, 2, 3))
        theta = 1.7
        base = logit_inputs(omega, theta=theta)
        p0 = choice_probabilities(**base)
        phi0, _ = market_potential(**base)
        shifted = omega.copy()
        shifted[1] += 0.37
        args = logit_inputs(shifted, theta=theta)
        p1 = choice_probabilities(**args)
        phi1, _ = market_potential(**args)
        np.testing.assert_allclose(p0, p1, atol=1e-12)
        assert phi1[1] / phi0[1] == pytest.approx(math.exp(theta * 0.37),
                                                  rel=1e-10)
        assert phi1[0] == phi0[0]

    def test_enumeration_order_invariance(self):
        rng = np.random.default_rng(9)
        C, M = 4, 3
        omega = rng.normal(size=(C, M, C))
        p_n, p_h, a = rng.normal(size=(3, C))
        d = np.zeros((C, C))
        taste = rng.uniform(0.5, 2.0, size=(C, M, C))
        p = choice_probabilities(omega, p_n, p_h, a, d, taste, 1.3, 0.5)
        perm_c = np.array([2, 0, 3, 1])
        perm_m = np.array([1, 2, 0])
        p_perm = choice_probabilities(
            omega[:, perm_m][:, :, perm_c], p_n[perm_c], p_h[perm_c],
            a[perm_c], d[:, perm_c], taste[:, perm_m][:, :, perm_c], 1.3, 0.5)
        np.testing.assert_allclose(p_perm, p[:, perm_m][:, :, perm_c],
                                   atol=1e-14)

    def test_high_theta_concentrates_on_argmax(self):
        rng = np.random.default_rng(2)
        omega = rng.normal(size=(1, 2, 4))
        p = choice_probabilities(**logit_inputs(omega, theta=50.0))
        assert p.max() > 0.99
        assert np.unravel_index(p.argmax(), p.shape) == \
            np.unravel_index(omega.argmax(), omega.shape)

    def test_monte_carlo_oracle_small(self):
        from skillscape import simulate_agents
        rng = np.random.default_rng(8)
        omega = rng.normal(1.0, 0.5, size=(2, 2, 3))
        args = logit_inputs(omega, theta=1.2, lam=0.4)
        args["p_n"] = np.array([0.5, 0.7, 0.4])
        args["p_h"] = np.array([0.2, 0.1, 0.3])
        args["a"] = np.array([0.0, 0.2, -0.1])
        p = choice_probabilities(**args)
        n = 200_000
        shares, _ = simulate_agents(n_agents=n, seed=123, **args)
        se = np.sqrt(p * (1.0 - p) / n)
        assert np.all(np.abs(shares - p) <= 3.5 * se + 1e-12)


class TestMarketPotential:
    def test_single_cell_unit_weight(self):
        omega = np.zeros((1, 1, 1))
        phi, log_phi = market_potential(**logit_inputs(omega))
        assert phi[0] == pytest.approx(1.0, abs=1e-14)
        assert log_phi[0] == pytest.approx(0.0, abs=1e-14)

    def test_phi_times_probability_recovers_numerator(self):
        rng = np.random.default_rng(4)
        omega = rng.normal(size=(3, 2, 3))
        taste = rng.uniform(0.5, 2.0, size=(3, 2, 3))
        args = logit_inputs(omega, theta=1.4)
        args["taste"] = taste
        p = choice_probabilities(**args)
        phi, _ = market_potential(**args)
        numerator = taste * np.exp(1.4 * omega)
        np.testing.assert_allclose(p * phi[:, None, None], numerator,
                                   rtol=1e-10)

    def test_doubling_taste_scales_phi_not_probabilities(self):
        rng = np.random.default_rng(6)
        omega = rng.normal(size=(2, 2, 2))
        args = logit_inputs(omega, theta=1.1)
        p0 = choice_probabilities(**args)
        phi0, _ = market_potential(**args)
        args2 = dict(args)
        args2["taste"] = 2.0 * args["taste"]
        p1 = choice_probabilities(**args2)
        phi1, _ = market_potential(**args2)
        np.testing.assert_allclose(p0, p1, atol=1e-14)
        np.testing.assert_allclose(phi1, 2.0 * phi0, rtol=1e-12)

    def test_log_space_survives_overflow(self):
        omega = np.full((1, 1, 2), 500.0)
        phi, log_phi = market_potential(**logit_inputs(omega, theta=2.0))
        assert np.isinf(phi[0]) and np.isfinite(log_phi[0])


class TestCollegeValue:
    def test_unit_potential_returns_xi(self):
        assert college_value(1.0, 3.0, 1.234) == pytest.approx(1.234)

    def test_hand_power(self):
        assert college_value(16.0, 2.0, 1.0) == pytest.approx(4.0)

    def test_monotone_in_phi(self):
        values = [college_value(phi, 1.7, 0.9) for phi in (1.0, 2.0, 5.0)]
        assert values[0] < values[1] < values[2]

    def test_log_phi_path_matches_level_path(self):
        assert college_value(None, 2.0, 1.5, log_phi=np.log(16.0)) == \
            pytest.approx(college_value(16.0, 2.0, 1.5))


class TestUnskilledValue:
    def test_full_expenditure_on_nontradable(self):
        got = unskilled_value(1.0, 30.0, 4.0, 12.0, 1.0)
        assert got == pytest.approx(4.0 - 12.0 - 1.0)

    def test_paper_scale_hand_value(self):
        got = unskilled_value(0.703, 30.0, 4.56, 12.0, 0.0)
        assert got == pytest.approx(0.297 * 30.0 + 4.56 - 12.0, abs=1e-12)
        assert got == pytest.approx(1.47, abs=1e-10)

    def test_symmetric_cities_equal_values(self):
        got = unskilled_value(0.7, np.full(3, 20.0), np.full(3, 1.0),
                              np.full(3, 5.0))
        assert np.ptp(got) == 0.0
