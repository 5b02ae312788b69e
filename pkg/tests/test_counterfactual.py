import numpy as np
import pytest

from skillscape import (
    equalize_skills,
    phi_tilde,
    redistribution_impact,
)


def flat_fixture(n=3, zeta=7.26):
    """Cities that differ only in their college fraction."""
    return dict(delta=np.linspace(0.15, 0.35, n), pop=np.ones(n),
                rho=np.full(n, 60.0), h=np.ones(n), p_n=np.full(n, 30.0),
                p_h=np.full(n, 12.0), a=np.zeros(n), lam=0.703,
                gamma_agg=0.22, gamma_sig=0.61, zeta=zeta)


class TestEqualizeSkills:
    def test_already_equal_is_identity(self):
        assert equalize_skills([0.3, 0.3], [1.0, 5.0]) == pytest.approx(0.3)

    def test_hand_mean(self):
        assert equalize_skills([0.2, 0.4], [1.0, 1.0]) == pytest.approx(0.3)

    def test_college_count_conserved(self):
        rng = np.random.default_rng(0)
        delta = rng.uniform(0.1, 0.5, size=6)
        pop = rng.uniform(0.5, 2.0, size=6)
        bar = equalize_skills(delta, pop)
        assert bar * pop.sum() == pytest.approx((delta * pop).sum(), rel=1e-14)


class TestPhiTilde:
    def test_zero_zeta_is_origin_independent(self):
        f = flat_fixture(zeta=0.0)
        values = [phi_tilde(f["delta"], k, f["rho"], f["h"], f["gamma_agg"],
                            0.0, f["gamma_sig"], f["p_n"], f["p_h"], f["a"],
                            f["lam"]) for k in range(3)]
        assert np.ptp(values) == 0.0

    def test_single_city_has_no_penalty(self):
        got = phi_tilde(np.array([0.25]), 0, np.array([60.0]), np.array([1.0]),
                        0.22, 7.26, 0.61, np.array([30.0]), np.array([12.0]),
                        np.array([1.5]), 0.703)
        want = 60.0 * 0.25 ** 0.22 - 0.703 * 30.0 - 12.0 + 1.5
        assert got == pytest.approx(want, abs=1e-12)

    def test_against_term_by_term_oracle(self):
        rng = np.random.default_rng(5)
        n = 3
        delta = rng.uniform(0.1, 0.5, size=n)
        rho = rng.uniform(40.0, 70.0, size=n)
        h = rng.uniform(0.8, 1.2, size=n)
        p_n = rng.uniform(25.0, 35.0, size=n)
        p_h = rng.uniform(8.0, 15.0, size=n)
        a = rng.normal(0.0, 2.0, size=n)
        lam, ga, gs, zeta = 0.703, 0.22, 0.61, 7.26
        for origin in range(n):
            oracle = 0.0
            for c in range(n):
                term = rho[c] * h[c] * delta[c] ** ga \
                    - lam * p_n[c] - p_h[c] + a[c]
                if c != origin:
                    term -= zeta * delta[origin] ** -gs
                oracle += term
            got = phi_tilde(delta, origin, rho, h, ga, zeta, gs, p_n, p_h, a,
                            lam)
            assert got == pytest.approx(oracle, abs=1e-12)

    def test_zero_fraction_with_positive_zeta_is_infinite_penalty(self):
        with pytest.raises(ValueError, match="infinite penalty"):
            phi_tilde(np.array([0.0, 0.3]), 0, np.full(2, 60.0), np.ones(2),
                      0.22, 7.26, 0.61, np.full(2, 30.0), np.full(2, 12.0),
                      np.zeros(2), 0.703)


class TestRedistributionImpact:
    def test_agglomeration_component_identical_across_origins(self):
        f = flat_fixture(n=8)
        report = redistribution_impact(**f)
        assert np.ptp(report.dphi_agglomeration) <= 1e-12

    def test_total_strictly_decreasing_in_initial_fraction(self):
        f = flat_fixture(n=10)
        report = redistribution_impact(**f)
        order = np.argsort(report.delta_initial)
        assert np.all(np.diff(report.dphi_total[order]) < 0)

    def test_noop_when_already_equal(self):
        f = flat_fixture(n=4)
        f["delta"] = np.full(4, 0.25)
        report = redistribution_impact(**f)
        np.testing.assert_allclose(report.dphi_total, 0.0, atol=1e-12)

    def test_decomposition_additive(self):
        f = flat_fixture(n=6)
        report = redistribution_impact(**f)
        np.testing.assert_allclose(
            report.dphi_total,
            report.dphi_agglomeration + report.dphi_signaling, atol=1e-12)

    def test_signaling_component_matches_independent_formula(self):
        f = flat_fixture(n=6)
        report = redistribution_impact(**f)
        n_other = 5
        bar = report.delta_bar
        oracle = f["zeta"] * n_other * (f["delta"] ** -f["gamma_sig"]
                                        - bar ** -f["gamma_sig"])
        np.testing.assert_allclose(report.dphi_signaling, oracle, atol=1e-10)

    def test_agglomeration_gain_nonnegative_by_jensen(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            n = int(rng.integers(3, 12))
            f = flat_fixture(n=n, zeta=0.0)
            f["delta"] = rng.uniform(0.05, 0.6, size=n)
            report = redistribution_impact(**f)
            assert np.all(report.dphi_agglomeration >= -1e-12)

    def test_convexity_in_initial_fraction(self):
        # decade-like fixtures: evenly spaced college fractions
        for lo, hi in ((0.16, 0.26), (0.18, 0.31), (0.21, 0.35)):
            f = flat_fixture(n=20)
            f["delta"] = np.linspace(lo, hi, 20)
            report = redistribution_impact(**f)
            order = np.argsort(report.delta_initial)
            second = np.diff(report.dphi_total[order], n=2)
            assert np.all(second >= -1e-9)

    def test_report_frame_schema(self):
        f = flat_fixture(n=3)
        frame = redistribution_impact(year=1980, **f).to_frame()
        assert list(frame.columns) == ["year", "origin", "delta_initial",
                                       "dphi_total", "dphi_agglomeration",
                                       "dphi_signaling"]
        assert (frame["year"] == 1980).all()
