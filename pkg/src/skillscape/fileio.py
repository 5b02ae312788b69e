"""File formats: canonical JSON configs, CSV tables, truth and state files.

The economy config file is UTF-8 JSON with top-level keys ``economy``,
``cities``, ``solver``, and ``estimation``; tensors are row-major nested
lists ordered [origin][major][destination].  Unknown keys anywhere in the
schema are a hard error.  Serialization is canonical (sorted keys, fixed
layout, shortest-round-trip floats) so serialize -> parse -> serialize is
byte-identical for any valid config.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .config import CityPrimitives, ConfigError, EconomyConfig
from .counterfactual import COUNTERFACTUAL_COLUMNS
from .datagen import GeneratorSpec
from .equilibrium import EquilibriumState, SolverSettings
from .estimation import MIGRATION_COLUMNS, PANEL_COLUMNS

ECONOMY_KEYS = {"n_cities", "n_majors", "lambda", "theta", "kappa_obs",
                "sigma2_xi", "sigma2_xihat", "gamma_sig", "zeta_tilde", "tau",
                "gamma_agg", "gamma_h", "kappa_h", "total_pop", "tuition",
                "xi_const"}
CITY_KEYS = {"productivity", "amenity", "match_quality", "endowment",
             "moving_cost", "taste_scale"}
SOLVER_KEYS = {"damping", "tol", "max_iter", "mode", "init"}
ESTIMATION_KEYS = {"zeta_by_year", "unit_scale_by_year", "base_wage_by_year"}
TOP_KEYS = {"economy", "cities", "solver", "estimation"}
GENERATOR_KEYS = {"seed", "n_cities", "n_majors", "n_agents_per_city",
                  "years", "noise_sd", "params"}


def canonical_json(obj) -> str:
    """Canonical serialization: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _check_keys(d: dict, allowed: set, where: str):
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError([f"unknown keys in {where}: {unknown}"])


def config_to_dict(config: EconomyConfig, cities: CityPrimitives,
                   solver: SolverSettings | None = None,
                   estimation: dict | None = None) -> dict:
    economy = {
        "n_cities": config.n_cities,
        "n_majors": config.n_majors,
        "lambda": config.lambda_,
        "theta": config.theta,
        "kappa_obs": config.kappa_obs,
        "sigma2_xi": config.sigma2_xi,
        "sigma2_xihat": config.sigma2_xihat,
        "gamma_sig": config.gamma_sig,
        "zeta_tilde": config.zeta_tilde,
        "tau": config.tau,
        "gamma_agg": config.gamma_agg,
        "gamma_h": config.gamma_h,
        "kappa_h": config.kappa_h,
        "total_pop": config.total_pop,
        "tuition": np.asarray(config.tuition).tolist(),
    }
    if config.xi_const is not None:
        economy["xi_const"] = config.xi_const
    city_block = {
        "productivity": np.asarray(cities.productivity).tolist(),
        "amenity": np.asarray(cities.amenity).tolist(),
        "match_quality": np.asarray(cities.match_quality).tolist(),
        "moving_cost": np.asarray(cities.moving_cost).tolist(),
    }
    if cities.endowment is not None:
        city_block["endowment"] = np.asarray(cities.endowment).tolist()
    if np.isscalar(cities.taste_scale):
        if cities.taste_scale != 1.0:
            city_block["taste_scale"] = float(cities.taste_scale)
    else:
        city_block["taste_scale"] = np.asarray(cities.taste_scale).tolist()
    out = {"economy": economy, "cities": city_block}
    if solver is not None:
        out["solver"] = {"damping": solver.damping, "tol": solver.tol,
                         "max_iter": solver.max_iter, "mode": solver.mode,
                         "init": solver.init}
    if estimation:
        out["estimation"] = estimation
    return out


def dict_to_config(d: dict):
    """Parse a config dict; returns (config, cities, solver, estimation)."""
    if not isinstance(d, dict):
        raise ConfigError(["config root must be a JSON object"])
    _check_keys(d, TOP_KEYS, "config root")
    for key in ("economy", "cities"):
        if key not in d:
            raise ConfigError([f"config is missing required block '{key}'"])
    econ = dict(d["economy"])
    _check_keys(econ, ECONOMY_KEYS, "economy")
    city = dict(d["cities"])
    _check_keys(city, CITY_KEYS, "cities")

    try:
        config = EconomyConfig(
            n_cities=int(econ["n_cities"]),
            n_majors=int(econ["n_majors"]),
            lambda_=float(econ["lambda"]),
            theta=float(econ["theta"]),
            kappa_obs=float(econ["kappa_obs"]),
            sigma2_xi=float(econ["sigma2_xi"]),
            sigma2_xihat=float(econ["sigma2_xihat"]),
            gamma_sig=float(econ["gamma_sig"]),
            zeta_tilde=float(econ["zeta_tilde"]),
            tau=float(econ["tau"]),
            gamma_agg=float(econ["gamma_agg"]),
            gamma_h=float(econ["gamma_h"]),
            kappa_h=float(econ["kappa_h"]),
            total_pop=float(econ["total_pop"]),
            tuition=np.asarray(econ["tuition"], dtype=float)
            if "tuition" in econ else None,
            xi_const=float(econ["xi_const"]) if "xi_const" in econ else None,
        )
        taste = city.get("taste_scale", 1.0)
        cities = CityPrimitives(
            productivity=np.asarray(city["productivity"], dtype=float),
            amenity=np.asarray(city["amenity"], dtype=float),
            match_quality=np.asarray(city["match_quality"], dtype=float)
            if "match_quality" in city else None,
            endowment=np.asarray(city["endowment"], dtype=float)
            if "endowment" in city else None,
            moving_cost=np.asarray(city["moving_cost"], dtype=float)
            if "moving_cost" in city else None,
            taste_scale=taste if np.isscalar(taste)
            else np.asarray(taste, dtype=float),
        )
    except KeyError as e:
        raise ConfigError([f"config is missing field {e}"]) from e

    solver = None
    if "solver" in d:
        sv = dict(d["solver"])
        _check_keys(sv, SOLVER_KEYS, "solver")
        solver = SolverSettings(**sv)
    estimation = {}
    if "estimation" in d:
        estimation = dict(d["estimation"])
        _check_keys(estimation, ESTIMATION_KEYS, "estimation")
        for key in list(estimation):
            if key.endswith("_by_year"):
                estimation[key] = {int(y): float(v)
                                   for y, v in estimation[key].items()}
    return config, cities, solver, estimation


def write_config(path, config, cities, solver=None, estimation=None):
    d = config_to_dict(config, cities, solver, estimation)
    # JSON keys are strings; year maps are re-keyed on parse
    if estimation:
        d["estimation"] = {
            k: ({str(y): v for y, v in val.items()} if isinstance(val, dict)
                else val)
            for k, val in d["estimation"].items()}
    Path(path).write_text(canonical_json(d), encoding="utf-8")


def read_config(path):
    with open(path, encoding="utf-8") as fh:
        return dict_to_config(json.load(fh))


def read_generator_spec(path) -> GeneratorSpec:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if not isinstance(d, dict):
        raise ConfigError(["generator spec root must be a JSON object"])
    _check_keys(d, GENERATOR_KEYS, "generator spec")
    return GeneratorSpec(**d)


def write_generator_spec(path, spec: GeneratorSpec):
    Path(path).write_text(canonical_json(spec.to_dict()), encoding="utf-8")


def _check_header(path, expected: list[str]):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
    if header != ",".join(expected):
        raise ConfigError([f"{path}: header {header!r} does not match the "
                           f"schema {','.join(expected)!r}"])


def write_panel(path, panel: pd.DataFrame):
    panel[PANEL_COLUMNS].to_csv(path, index=False)


def read_panel(path) -> pd.DataFrame:
    _check_header(path, PANEL_COLUMNS)
    return pd.read_csv(path, dtype={"msa": str, "year": int})


def write_migration(path, migration: pd.DataFrame):
    migration[MIGRATION_COLUMNS].to_csv(path, index=False)


def read_migration(path) -> pd.DataFrame:
    _check_header(path, MIGRATION_COLUMNS)
    return pd.read_csv(path, dtype={"origin": str, "dest": str, "year": int})


def write_truth(path, truth: dict):
    Path(path).write_text(canonical_json(truth), encoding="utf-8")


def read_truth(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_results(path, results: pd.DataFrame):
    results.to_csv(path, index=False)


def write_counterfactual(path, frame: pd.DataFrame):
    frame[COUNTERFACTUAL_COLUMNS].to_csv(path, index=False)


def write_state(path, state: EquilibriumState):
    Path(path).write_text(canonical_json(state.to_dict()), encoding="utf-8")


def read_state(path) -> EquilibriumState:
    with open(path, encoding="utf-8") as fh:
        return EquilibriumState.from_dict(json.load(fh))


def write_trace(path, rows: list[dict]):
    cols = ["iteration", "gap", "gap_population", "gap_shares",
            "gap_migration", "population_drift"]
    pd.DataFrame(rows, columns=cols).to_csv(path, index=False)
