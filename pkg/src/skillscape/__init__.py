"""Spatial skill-acquisition toolkit: solve, estimate, and counterfact.

Students learn about wages from their local labor market, choose a major
and destination under Frechet taste shocks and CARA risk aversion, and
wages carry agglomeration externalities.  The package solves the
resulting equilibrium, recovers the structural parameters from synthetic
or supplied panels, and runs the skill-redistribution experiment.
"""

from .beliefs import (
    GaussianBelief,
    posterior_diffuse,
    posterior_update,
    signal_precision,
)
from .choice import (
    choice_probabilities,
    college_value,
    effective_wage,
    market_potential,
    simplified_effective_wage,
    unskilled_value,
)
from .config import (
    CityPrimitives,
    ConfigError,
    EconomyConfig,
    ensure_valid,
    validate_config,
    xi_constant,
)
from .counterfactual import (
    CounterfactualReport,
    equalize_skills,
    phi_tilde,
    redistribution_impact,
)
from .datagen import (
    GeneratorSpec,
    frechet_sample,
    generate_panel,
    occupational_similarity,
    random_economy,
    simulate_agents,
)
from .equilibrium import (
    EquilibriumState,
    NonConvergenceError,
    SolverSettings,
    agglomeration_index,
    clearing_residuals,
    housing_price,
    nontradable_price,
    solve_equilibrium,
    wages_from_productivity,
)
from .estimation import (
    EstimationResult,
    FeOlsResult,
    PanelObservation,
    agglomeration_dollar_impact,
    dollar_impact,
    estimate_agglomeration,
    estimate_all,
    estimate_lambda,
    estimate_signaling,
    fe_ols,
    lambda_from_shares,
    signaling_residual,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianBelief", "posterior_diffuse", "posterior_update",
    "signal_precision",
    "choice_probabilities", "college_value", "effective_wage",
    "market_potential", "simplified_effective_wage", "unskilled_value",
    "CityPrimitives", "ConfigError", "EconomyConfig", "ensure_valid",
    "validate_config", "xi_constant",
    "CounterfactualReport", "equalize_skills", "phi_tilde",
    "redistribution_impact",
    "GeneratorSpec", "frechet_sample", "generate_panel",
    "occupational_similarity", "random_economy", "simulate_agents",
    "EquilibriumState", "NonConvergenceError", "SolverSettings",
    "agglomeration_index", "clearing_residuals", "housing_price",
    "nontradable_price", "solve_equilibrium", "wages_from_productivity",
    "EstimationResult", "FeOlsResult", "PanelObservation",
    "agglomeration_dollar_impact", "dollar_impact",
    "estimate_agglomeration", "estimate_all", "estimate_lambda",
    "estimate_signaling", "fe_ols", "lambda_from_shares",
    "signaling_residual",
]
