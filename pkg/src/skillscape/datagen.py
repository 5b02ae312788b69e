"""Synthetic data: agent-level simulation, panel generation, similarity.

Two distinct generators live here.

``simulate_agents`` draws individual Frechet taste shocks and lets each
agent pick its best (major, city) cell; empirical shares converge to the
closed-form choice probabilities, which makes it the independent oracle
for the choice block.  Randomness uses the counter-based Philox generator
with one spawned substream per origin, so results are reproducible and
independent of the parallel schedule.

``generate_panel`` produces an MSA-year estimation panel plus migration
counts from the reduced-form structure of the estimating equations: rents
from the housing supply curve, unskilled wages from the indifference
condition, skilled wages from the agglomeration equation, and migration
shares from the log-odds moment.  A truth file records every generating
parameter so recovery tests can close the loop.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .config import CityPrimitives, EconomyConfig
from .estimation import MIGRATION_COLUMNS, PANEL_COLUMNS

DEFAULT_YEARS = (1980, 1990, 2000)
DEFAULT_NOISE = {"rent": 0.01, "wage": 0.01, "share": 0.1}

# Paper-valued truths used by default generator specs and the verify command.
DEFAULT_TRUTH = {
    "lambda": 0.703,
    "gamma_sig": 0.61,
    "gamma_agg": 0.22,
    "gamma_h": 0.3,
    "kappa_h": 0.25,
    "unskilled_level": 2.0,
    "amenity_sd": 2.0,
    "log_wage_level": 3.64,     # ~ ln 38: skilled wage scale in model units
    "log_wage_sd": 0.08,
    "delta_sd_city": 0.3,
    "delta_sd_year": 0.05,
    "pop_log_mean": 12.9,       # ~ ln 400k
    "pop_log_sd": 0.5,
    "pop_drift_sd": 0.25,
    "zeta_1980": 7.26,
    "zeta_1990": 7.59,
    "zeta_2000": 8.03,
    "delta_base_1980": 0.20,
    "delta_base_1990": 0.23,
    "delta_base_2000": 0.27,
}


@dataclass
class GeneratorSpec:
    """Deterministic recipe for one synthetic data set."""

    seed: int = 0
    n_cities: int = 200
    n_majors: int = 1
    n_agents_per_city: int = 100_000
    years: tuple = DEFAULT_YEARS
    noise_sd: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))
    params: dict = field(default_factory=lambda: dict(DEFAULT_TRUTH))

    def __post_init__(self):
        self.years = tuple(int(y) for y in self.years)
        merged = dict(DEFAULT_NOISE)
        merged.update(self.noise_sd)
        self.noise_sd = merged
        params = dict(DEFAULT_TRUTH)
        params.update(self.params)
        self.params = params
        for y in self.years:
            if f"zeta_{y}" not in self.params:
                raise ValueError(f"generator spec is missing zeta_{y}")

    def zeta(self, year: int) -> float:
        return float(self.params[f"zeta_{year}"])

    def delta_base(self, year: int) -> float:
        key = f"delta_base_{year}"
        if key in self.params:
            return float(self.params[key])
        # unseen years ramp geometrically from the last documented base
        return 0.20 * 1.15 ** self.years.index(year)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def frechet_sample(taste_scale, theta, u):
    """Inverse-CDF draw from F(z) = exp(-T z**(-theta)).

    ``u`` must lie strictly inside (0, 1); applying F to the output
    returns u exactly.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("uniform variates must lie strictly in (0, 1)")
    out = (np.asarray(taste_scale, dtype=float) / -np.log(u)) ** \
        (1.0 / theta)
    if out.ndim == 0:
        return float(out)
    return out


def frechet_cdf(z, taste_scale=1.0, theta=1.0):
    z = np.asarray(z, dtype=float)
    out = np.exp(-taste_scale * z ** (-theta))
    if out.ndim == 0:
        return float(out)
    return out


def _simulate_origin(args):
    """Agent draws for one origin; independent Philox substream."""
    utilities, taste, theta, n_agents, seq = args
    rng = np.random.Generator(np.random.Philox(seq))
    n_cells = utilities.size
    counts = np.zeros(n_cells, dtype=np.int64)
    feasible = np.isfinite(utilities)
    chunk = 65536
    done = 0
    while done < n_agents:
        size = min(chunk, n_agents - done)
        u = rng.random((size, n_cells))
        u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).eps)
        with np.errstate(divide="ignore"):
            log_z = (np.log(taste) - np.log(-np.log(u))) / theta
        total = np.where(feasible[None, :], utilities[None, :] + log_z, -np.inf)
        picks = np.argmax(total, axis=1)    # ties break to the lowest index
        counts += np.bincount(picks, minlength=n_cells)
        done += size
    return counts


def simulate_agents(omega, p_n, p_h, a, d, taste, theta, lam, n_agents,
                    seed, n_threads=1):
    """Empirical choice shares from individually simulated students.

    Every agent draws one Frechet shock per (major, city) cell and picks
    the cell maximizing the log utility argument; returns (shares, counts)
    with the same (C0, nm, C) layout as the closed-form probabilities.
    """
    from .choice import _utility_argument

    u = _utility_argument(omega, p_n, p_h, a, d, lam)
    C0 = u.shape[0]
    taste = np.broadcast_to(np.asarray(taste, dtype=float), u.shape)
    seqs = np.random.SeedSequence(seed).spawn(C0)
    jobs = [(u[k].ravel(), taste[k].ravel(), theta, n_agents, seqs[k])
            for k in range(C0)]
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(_simulate_origin, jobs))
    else:
        results = [_simulate_origin(j) for j in jobs]
    counts = np.stack(results).reshape(u.shape)
    return counts / float(n_agents), counts


def occupational_similarity(dist_a, transition, dist_b) -> float:
    """Bilinear proximity of two occupation mixes through a transition matrix."""
    dist_a = np.asarray(dist_a, dtype=float)
    dist_b = np.asarray(dist_b, dtype=float)
    transition = np.asarray(transition, dtype=float)
    if transition.shape != (dist_a.size, dist_b.size):
        raise ValueError(f"dimension mismatch: transition {transition.shape} "
                         f"vs distributions {dist_a.size}, {dist_b.size}")
    for name, dist in (("dist_a", dist_a), ("dist_b", dist_b)):
        if not np.isclose(dist.sum(), 1.0, atol=1e-8):
            raise ValueError(f"{name} must sum to one, got {dist.sum()}")
    if not np.allclose(transition.sum(axis=1), 1.0, atol=1e-8):
        raise ValueError("transition rows must sum to one")
    return float(dist_a @ transition @ dist_b)


def _msa_labels(n: int) -> list[str]:
    width = max(4, len(str(n)))
    return [f"MSA{i:0{width}d}" for i in range(n)]


def generate_panel(spec: GeneratorSpec):
    """Synthesize (panel, migration, truth) for one generator spec.

    Identical specs produce byte-identical frames; all randomness flows
    from one Philox stream keyed by the seed.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    p = spec.params
    n, years = spec.n_cities, spec.years
    lam = p["lambda"]
    msas = _msa_labels(n)

    amenity = rng.normal(0.0, p["amenity_sd"], size=n)
    log_rho_h = rng.normal(p["log_wage_level"], p["log_wage_sd"], size=n)
    delta_city = rng.normal(0.0, p["delta_sd_city"], size=n)
    log_pop_city = rng.normal(p["pop_log_mean"], p["pop_log_sd"], size=n)

    panel_rows = []
    mig_frames = []
    for t, year in enumerate(years):
        delta = np.clip(spec.delta_base(year) * np.exp(
            delta_city + rng.normal(0.0, p["delta_sd_year"], size=n)),
            0.03, 0.95)
        pop = np.exp(log_pop_city + rng.normal(0.0, p["pop_drift_sd"], size=n))
        rent_true = p["kappa_h"] * pop ** p["gamma_h"]
        pn_true = (p["unskilled_level"] + rent_true - amenity) / (1.0 - lam)
        wage_true = np.exp(log_rho_h + 0.03 * t) * delta ** p["gamma_agg"]

        rent_obs = rent_true * (1.0 + spec.noise_sd["rent"]
                                * rng.standard_normal(n))
        wage_obs = wage_true * (1.0 + spec.noise_sd["wage"]
                                * rng.standard_normal(n))
        pn_obs = pn_true * (1.0 + spec.noise_sd["wage"]
                            * rng.standard_normal(n))

        # log-odds structure of the migration moment, theta = 1
        attraction = wage_true - lam * pn_true - rent_true + amenity
        penalty = spec.zeta(year) * delta ** (-p["gamma_sig"])
        exponent = attraction[None, :] - penalty[:, None] \
            * (1.0 - np.eye(n))
        exponent -= exponent.max(axis=1, keepdims=True)
        shares = np.exp(exponent)
        shares /= shares.sum(axis=1, keepdims=True)
        if spec.noise_sd["share"] > 0:
            shares = shares * np.exp(spec.noise_sd["share"]
                                     * rng.standard_normal((n, n)))
        counts = shares * pop[:, None]

        for c in range(n):
            panel_rows.append({
                "msa": msas[c], "year": year, "w_skilled": wage_obs[c],
                "w_unskilled": pn_obs[c], "rent": rent_obs[c],
                "college_frac": delta[c], "pop": pop[c]})
        oo, dd = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        mig_frames.append(pd.DataFrame({
            "year": year,
            "origin": np.array(msas)[oo.ravel()],
            "dest": np.array(msas)[dd.ravel()],
            "count": counts.ravel()}))

    panel = pd.DataFrame(panel_rows, columns=PANEL_COLUMNS)
    migration = pd.concat(mig_frames, ignore_index=True)[MIGRATION_COLUMNS]

    truth = {"seed": spec.seed, "n_cities": n, "n_majors": spec.n_majors}
    truth.update({k: float(v) for k, v in p.items()})
    truth.update({f"noise_{k}": float(v) for k, v in spec.noise_sd.items()})
    truth.update({f"amenity_{m}": float(v) for m, v in zip(msas, amenity)})
    return panel, migration, truth


def random_economy(seed, n_cities=None, n_majors=None):
    """A random valid (EconomyConfig, CityPrimitives) pair for fixtures.

    Populations are normalized to one so residuals read in natural units;
    parameter ranges keep the damped solver comfortably convergent.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    C = int(rng.integers(2, 21)) if n_cities is None else int(n_cities)
    M = int(rng.integers(1, 4)) if n_majors is None else int(n_majors)

    tuition = np.zeros((C, M + 1))
    tuition[:, 1:] = rng.uniform(0.0, 0.3, size=(C, M))
    config = EconomyConfig(
        n_cities=C, n_majors=M,
        lambda_=float(rng.uniform(0.55, 0.8)),
        theta=float(rng.uniform(1.3, 2.5)),
        kappa_obs=float(rng.uniform(5.0, 20.0)),
        sigma2_xi=float(rng.uniform(0.2, 1.0)),
        sigma2_xihat=float(rng.uniform(0.2, 1.0)),
        gamma_sig=float(rng.uniform(0.4, 0.8)),
        zeta_tilde=float(rng.uniform(0.5, 2.0)),
        tau=float(rng.uniform(0.0, 0.5)),
        gamma_agg=float(rng.uniform(0.1, 0.3)),
        gamma_h=float(rng.uniform(0.2, 0.5)),
        kappa_h=float(rng.uniform(0.5, 2.0)),
        total_pop=1.0,
        tuition=tuition,
    )
    cities = CityPrimitives(
        productivity=10.0 * np.exp(rng.normal(0.0, 0.05, size=C)),
        amenity=rng.normal(0.0, 0.3, size=C),
        match_quality=np.exp(rng.normal(0.0, 0.05, size=C)),
    )
    return config, cities
