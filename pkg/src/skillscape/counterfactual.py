"""Skill-redistribution experiment on the linearized market-potential measure.

College workers are reallocated so every city holds the population-weighted
mean college fraction, and the change in a linearized market potential is
evaluated per origin in partial equilibrium (prices, amenities, and
productivities held fixed).  The measure sums, over destinations,

    rho_c * h_c * delta_c**gamma_agg - lambda p_n,c - p_h,c + a_c

minus a signal-cost penalty zeta * delta_origin**(-gamma) for every
non-origin destination: the home wage is known with certainty, so only
alternative destinations carry uncertainty, and the strength of the
signal about them comes from the college share around the student at
home.  A constant variance term is dropped throughout, so only
differences of the measure are meaningful; levels are not comparable
across specifications.

The decomposition reruns the computation with the penalty switched off:
the agglomeration part is identical across origins, and the signaling
part is convex and decreasing in the origin's initial college fraction,
which is what makes redistribution so valuable to low-skill origins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

COUNTERFACTUAL_COLUMNS = ["year", "origin", "delta_initial", "dphi_total",
                          "dphi_agglomeration", "dphi_signaling"]


@dataclass
class CounterfactualReport:
    """Per-origin welfare changes from equalizing college fractions."""

    year: int | str
    delta_bar: float
    origins: list
    delta_initial: np.ndarray
    dphi_total: np.ndarray
    dphi_agglomeration: np.ndarray
    dphi_signaling: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "year": [self.year] * len(self.origins),
            "origin": list(self.origins),
            "delta_initial": self.delta_initial,
            "dphi_total": self.dphi_total,
            "dphi_agglomeration": self.dphi_agglomeration,
            "dphi_signaling": self.dphi_signaling,
        }, columns=COUNTERFACTUAL_COLUMNS)


def equalize_skills(delta, pop) -> float:
    """Common college fraction that conserves the total count of college workers."""
    delta = np.asarray(delta, dtype=float)
    pop = np.asarray(pop, dtype=float)
    if np.any(pop <= 0):
        raise ValueError("populations must be strictly positive")
    return float(np.average(delta, weights=pop))


def phi_tilde(delta, origin, rho, h, gamma_agg, zeta, gamma_sig, p_n, p_h, a,
              lam) -> float:
    """Linearized market potential of one origin at college fractions delta."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0) or np.any(delta > 1):
        if zeta > 0 and np.any(delta <= 0):
            raise ValueError("infinite penalty in linearized measure: "
                             "college fraction of zero with a positive "
                             "signal cost")
        raise ValueError("college fractions must lie in (0, 1]")
    rho = np.asarray(rho, dtype=float)
    h = np.asarray(h, dtype=float)
    base = rho * h * delta ** gamma_agg \
        - lam * np.asarray(p_n, dtype=float) - np.asarray(p_h, dtype=float) \
        + np.asarray(a, dtype=float)
    n_other = delta.size - 1
    penalty = zeta * n_other * delta[origin] ** (-gamma_sig)
    return float(base.sum() - penalty)


def redistribution_impact(delta, pop, rho, h, p_n, p_h, a, lam, gamma_agg,
                          gamma_sig, zeta, year="", origins=None
                          ) -> CounterfactualReport:
    """Change in the linearized measure per origin from equalizing skills.

    Prices and amenities are held fixed (partial equilibrium).  The
    signaling column is the difference between the total and the
    penalty-free rerun, so the decomposition is additive by construction.
    """
    delta = np.asarray(delta, dtype=float)
    n = delta.size
    origins = list(range(n)) if origins is None else list(origins)
    delta_bar = equalize_skills(delta, pop)
    flat = np.full(n, delta_bar)

    def impacts(z):
        return np.array([
            phi_tilde(flat, k, rho, h, gamma_agg, z, gamma_sig, p_n, p_h, a, lam)
            - phi_tilde(delta, k, rho, h, gamma_agg, z, gamma_sig, p_n, p_h, a, lam)
            for k in range(n)])

    total = impacts(zeta)
    agglomeration = impacts(0.0)
    return CounterfactualReport(
        year=year, delta_bar=delta_bar, origins=origins,
        delta_initial=delta.copy(), dphi_total=total,
        dphi_agglomeration=agglomeration,
        dphi_signaling=total - agglomeration)


def redistribution_from_state(state, cities, lam, gamma_agg, gamma_sig,
                              zeta_by_year: dict) -> list[CounterfactualReport]:
    """Per-year reports from a solved equilibrium state.

    The state's college fraction is one minus the unskilled share; match
    quality must be in its collapsed per-city form for the two-skill
    measure.  Note that non-tradable clearing equalizes college shares
    across cities in full equilibrium, so this path is the degenerate
    no-op benchmark; the interesting heterogeneous-delta experiment runs
    from panel data via ``redistribution_from_panel``.
    """
    h = np.asarray(cities.match_quality, dtype=float)
    if h.ndim != 1:
        raise ValueError("the linearized measure needs per-city match "
                         "quality (collapsed mode)")
    delta = 1.0 - np.asarray(state.skill_share)[:, 0]
    reports = []
    for year in sorted(zeta_by_year):
        reports.append(redistribution_impact(
            delta, state.population, cities.productivity, h,
            state.p_nontradable, state.p_housing, cities.amenity, lam,
            gamma_agg, gamma_sig, zeta_by_year[year], year=year))
    return reports


def redistribution_from_panel(panel, result) -> list[CounterfactualReport]:
    """Per-year reports from an MSA-year panel and fitted parameters.

    This is the data-driven experiment: college fractions, populations,
    and prices come straight from the panel, amenities and elasticities
    from the estimation result, and the city productivity level is backed
    out of the observed skilled wage as w / delta**gamma_agg.
    """
    reports = []
    for year in sorted(result.zeta_hat):
        block = panel[panel["year"] == year].sort_values("msa")
        if block.empty:
            continue
        delta = block["college_frac"].to_numpy(dtype=float)
        rho_h = block["w_skilled"].to_numpy(dtype=float) \
            / delta ** result.gamma_agg_hat
        amenity = np.array([result.amenities.get(m, 0.0)
                            for m in block["msa"]])
        reports.append(redistribution_impact(
            delta=delta, pop=block["pop"].to_numpy(dtype=float),
            rho=rho_h, h=np.ones(delta.size),
            p_n=block["w_unskilled"].to_numpy(dtype=float),
            p_h=block["rent"].to_numpy(dtype=float), a=amenity,
            lam=result.lambda_hat, gamma_agg=result.gamma_agg_hat,
            gamma_sig=result.gamma_hat, zeta=result.zeta_hat[year],
            year=year, origins=list(block["msa"])))
    return reports
