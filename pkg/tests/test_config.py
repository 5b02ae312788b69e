import math

import numpy as np
import pytest
from scipy import integrate

from skillscape import (
    CityPrimitives,
    EconomyConfig,
    ensure_valid,
    random_economy,
    validate_config,
    xi_constant,
)
from skillscape.config import ConfigError
from skillscape.fileio import canonical_json, config_to_dict, dict_to_config


def paper_config(**overrides):
    kwargs = dict(n_cities=3, n_majors=2, lambda_=0.703, theta=1.8,
                  kappa_obs=10.0, sigma2_xi=0.5, sigma2_xihat=0.5,
                  gamma_sig=0.61, zeta_tilde=1.0, tau=0.3, gamma_agg=0.22,
                  gamma_h=0.3, kappa_h=1.0, total_pop=1.0)
    kwargs.update(overrides)
    return EconomyConfig(**kwargs)


def default_cities(C=3):
    return CityPrimitives(productivity=np.full(C, 10.0),
                          amenity=np.zeros(C))


class TestValidation:
    def test_paper_valued_config_is_valid(self):
        assert validate_config(paper_config(), default_cities()) == []

    def test_lambda_out_of_bounds(self):
        violations = validate_config(paper_config(lambda_=1.3), default_cities())
        assert any("lambda" in v for v in violations)

    def test_moving_cost_diagonal(self):
        d = np.array([[0.0, 0.1, 0.1], [0.1, 0.5, 0.1], [0.1, 0.1, 0.0]])
        cities = CityPrimitives(productivity=np.full(3, 10.0),
                                amenity=np.zeros(3), moving_cost=d)
        violations = validate_config(paper_config(), cities)
        assert any("moving_cost diagonal" in v for v in violations)

    def test_nonpositive_scale_reported_with_value(self):
        violations = validate_config(paper_config(gamma_agg=-0.2),
                                     default_cities())
        assert any("gamma_agg" in v and "-0.2" in v for v in violations)

    def test_tuition_for_no_college_must_be_zero(self):
        t = np.zeros((3, 3))
        t[:, 0] = 1.0
        violations = validate_config(paper_config(tuition=t), default_cities())
        assert any("m=0" in v for v in violations)

    def test_theta_below_one_needs_xi_override(self):
        violations = validate_config(paper_config(theta=0.9), default_cities())
        assert any("closed form" in v for v in violations)
        assert validate_config(paper_config(theta=0.9, xi_const=1.5),
                               default_cities()) == []

    def test_ensure_valid_raises(self):
        with pytest.raises(ConfigError, match="lambda"):
            ensure_valid(paper_config(lambda_=-0.1), default_cities())

    def test_generator_configs_always_validate(self):
        for seed in range(100):
            config, cities = random_economy(seed)
            assert validate_config(config, cities) == []


class TestXiConstant:
    def test_theta_two_is_root_pi(self):
        assert xi_constant(2.0) == pytest.approx(math.sqrt(math.pi), abs=1e-12)

    def test_against_quadrature_oracle(self):
        # E[Z] = integral of the survival function for a positive variate
        for theta in (1.5, 2.0, 3.0, 5.0):
            oracle, _ = integrate.quad(
                lambda z: 1.0 - np.exp(-z ** (-theta)), 0.0, np.inf)
            assert xi_constant(theta) == pytest.approx(oracle, rel=1e-8)

    def test_large_theta_limit(self):
        assert xi_constant(1000.0) == pytest.approx(1.0, abs=1e-2)

    def test_pole_at_one(self):
        with pytest.raises(ValueError, match="xi undefined"):
            xi_constant(1.0)


class TestCanonicalRoundTrip:
    def test_serialize_parse_serialize_is_byte_identical(self):
        for seed in range(100):
            config, cities = random_economy(seed)
            first = canonical_json(config_to_dict(config, cities))
            reparsed = dict_to_config(__import__("json").loads(first))
            second = canonical_json(config_to_dict(reparsed[0], reparsed[1]))
            assert first == second

    def test_unknown_key_is_hard_error(self):
        config, cities = random_economy(0)
        d = config_to_dict(config, cities)
        d["economy"]["mystery"] = 1.0
        with pytest.raises(ConfigError, match="unknown keys"):
            dict_to_config(d)
        d2 = config_to_dict(config, cities)
        d2["extra_block"] = {}
        with pytest.raises(ConfigError, match="unknown keys"):
            dict_to_config(d2)

    def test_immutability_after_validation(self):
        config, cities = random_economy(1)
        with pytest.raises(ValueError):
            config.tuition[0, 0] = 5.0
        with pytest.raises(ValueError):
            cities.productivity[0] = 1.0
