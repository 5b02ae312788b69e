"""Parameter and primitive containers for the skill-acquisition economy.

Every structural symbol lives here as a typed field, so the solver,
estimator, and generators all consume one validated vocabulary.

Shape conventions (used throughout the package):
    C  = number of cities, indexed ``c`` (destination) or ``c0`` (origin)
    M  = number of college majors; major index 0 is always "no college"
    tensors are row-major [origin, major, destination]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class EconomyConfig:
    """Structural parameters shared by all cities.

    ``kappa_h`` is the housing price scale (the level constant in
    p_h = kappa_h * L**gamma_h); it is deliberately named apart from
    ``kappa_obs``, the number of wage observations a student sees.
    ``xi_const`` defaults to the Frechet-max expectation Gamma(1 - 1/theta)
    and may be overridden for sensitivity runs.

    All currency-valued quantities are annual, deflated units.
    """

    n_cities: int
    n_majors: int                 # college majors only; m=0 is implicit
    lambda_: float                # non-tradable expenditure share
    theta: float                  # Frechet taste dispersion
    kappa_obs: float              # wage observations per student
    sigma2_xi: float              # wage variance
    sigma2_xihat: float           # signal noise variance
    gamma_sig: float              # signaling elasticity
    zeta_tilde: float             # composite signal-cost scale
    tau: float                    # non-origin signal attenuation
    gamma_agg: float              # agglomeration elasticity
    gamma_h: float                # housing supply elasticity
    kappa_h: float                # housing price scale
    total_pop: float
    tuition: np.ndarray = None    # (C, M+1); column 0 must be zero
    xi_const: float | None = None

    def __post_init__(self):
        C, M = self.n_cities, self.n_majors
        t = np.zeros((C, M + 1)) if self.tuition is None else self.tuition
        object.__setattr__(self, "tuition", _readonly(t))

    @property
    def xi(self) -> float:
        """College-value proportionality constant (override or closed form)."""
        if self.xi_const is not None:
            return self.xi_const
        return xi_constant(self.theta)


@dataclass(frozen=True)
class CityPrimitives:
    """Per-city fundamentals.

    ``match_quality`` may be a (C,) vector (the h_{c0c} = h_c collapse,
    the default mode) or a full (C, M, C) origin-major-destination tensor.
    ``taste_scale`` may be a scalar (1.0 under the estimation
    simplification) or a (C, M+1, C) tensor over choice cells.
    """

    productivity: np.ndarray                    # rho_c, (C,)
    amenity: np.ndarray                         # a_c, (C,), currency
    match_quality: np.ndarray = None            # (C,) or (C, M, C)
    endowment: np.ndarray = None                # (C, M+1), worker mass
    moving_cost: np.ndarray = None              # (C, C), zero diagonal
    taste_scale: np.ndarray | float = 1.0

    def __post_init__(self):
        C = len(np.atleast_1d(self.productivity))
        object.__setattr__(self, "productivity", _readonly(self.productivity))
        object.__setattr__(self, "amenity", _readonly(self.amenity))
        mq = np.ones(C) if self.match_quality is None else self.match_quality
        object.__setattr__(self, "match_quality", _readonly(mq))
        mc = np.zeros((C, C)) if self.moving_cost is None else self.moving_cost
        object.__setattr__(self, "moving_cost", _readonly(mc))
        if self.endowment is not None:
            object.__setattr__(self, "endowment", _readonly(self.endowment))
        if not np.isscalar(self.taste_scale):
            object.__setattr__(self, "taste_scale", _readonly(self.taste_scale))

    @property
    def n_cities(self) -> int:
        return self.productivity.shape[0]

    def endowment_or_zero(self, n_majors: int) -> np.ndarray:
        if self.endowment is None:
            return np.zeros((self.n_cities, n_majors + 1))
        return np.asarray(self.endowment, dtype=float)

    def match_quality_tensor(self, n_majors: int) -> np.ndarray:
        """Match quality expanded to (C, M, C) regardless of storage mode."""
        h = np.asarray(self.match_quality, dtype=float)
        C = self.n_cities
        if h.ndim == 1:
            return np.broadcast_to(h[None, None, :], (C, n_majors, C))
        return h

    def taste_tensor(self, n_majors: int) -> np.ndarray:
        """Taste scales expanded to (C, M+1, C)."""
        C = self.n_cities
        if np.isscalar(self.taste_scale):
            return np.full((C, n_majors + 1, C), float(self.taste_scale))
        return np.asarray(self.taste_scale, dtype=float)


def xi_constant(theta: float) -> float:
    """Expected maximum of a unit Frechet draw: Gamma(1 - 1/theta).

    Defined only for theta > 1 (the mean of a Frechet variate diverges at
    theta = 1).
    """
    if theta <= 1.0:
        raise ValueError(f"xi undefined: requires theta > 1, got {theta}")
    return float(special.gamma(1.0 - 1.0 / theta))


def validate_config(config: EconomyConfig, cities: CityPrimitives) -> list[str]:
    """Check every invariant; return a list of named violations (empty if valid)."""
    v: list[str] = []
    C, M = config.n_cities, config.n_majors

    if C < 1:
        v.append(f"n_cities must be positive, got {C}")
    if M < 1:
        v.append(f"n_majors must be positive, got {M}")
    if not 0.0 <= config.lambda_ <= 1.0:
        v.append(f"lambda out of [0,1]: {config.lambda_}")
    for name in ("theta", "kappa_obs", "gamma_sig", "zeta_tilde", "gamma_agg",
                 "gamma_h", "kappa_h", "total_pop"):
        val = getattr(config, name)
        if not val > 0:
            v.append(f"{name} must be strictly positive, got {val}")
    for name in ("sigma2_xi", "sigma2_xihat", "tau"):
        val = getattr(config, name)
        if val < 0:
            v.append(f"{name} must be nonnegative, got {val}")
    if config.xi_const is None and config.theta <= 1.0:
        v.append(f"theta must exceed 1 when xi_const is computed "
                 f"from the closed form, got {config.theta}")
    if config.xi_const is not None and not config.xi_const > 0:
        v.append(f"xi_const must be strictly positive, got {config.xi_const}")

    if config.tuition.shape != (C, M + 1):
        v.append(f"tuition shape {config.tuition.shape} != {(C, M + 1)}")
    else:
        if np.any(config.tuition < 0):
            v.append("tuition has negative entries")
        if np.any(config.tuition[:, 0] != 0.0):
            bad = float(np.abs(config.tuition[:, 0]).max())
            v.append(f"tuition for m=0 must be zero, max abs {bad}")

    if cities.productivity.shape != (C,):
        v.append(f"productivity shape {cities.productivity.shape} != {(C,)}")
    elif np.any(cities.productivity <= 0):
        v.append("productivity must be strictly positive")
    if cities.amenity.shape != (C,):
        v.append(f"amenity shape {cities.amenity.shape} != {(C,)}")

    h = cities.match_quality
    if h.ndim == 1 and h.shape != (C,):
        v.append(f"match_quality vector shape {h.shape} != {(C,)}")
    elif h.ndim == 3 and h.shape != (C, M, C):
        v.append(f"match_quality tensor shape {h.shape} != {(C, M, C)}")
    elif h.ndim not in (1, 3):
        v.append(f"match_quality must be 1-d or 3-d, got ndim {h.ndim}")
    elif np.any(h <= 0):
        v.append("match_quality must be strictly positive")

    if cities.endowment is not None:
        e = cities.endowment
        if e.shape != (C, M + 1):
            v.append(f"endowment shape {e.shape} != {(C, M + 1)}")
        elif np.any(e < 0):
            v.append("endowment has negative entries")
        elif e.sum() >= config.total_pop:
            v.append(f"endowment total {e.sum()} must be below "
                     f"total_pop {config.total_pop}")

    d = cities.moving_cost
    if d.shape != (C, C):
        v.append(f"moving_cost shape {d.shape} != {(C, C)}")
    else:
        if np.any(d < 0):
            v.append("moving_cost has negative entries")
        diag = np.abs(np.diag(d)).max() if C else 0.0
        if diag != 0.0:
            v.append(f"moving_cost diagonal nonzero, max abs {diag}")

    if not np.isscalar(cities.taste_scale):
        ts = cities.taste_scale
        if ts.shape != (C, M + 1, C):
            v.append(f"taste_scale shape {ts.shape} != {(C, M + 1, C)}")
        elif np.any(ts <= 0):
            v.append("taste_scale must be strictly positive")
    elif not cities.taste_scale > 0:
        v.append(f"taste_scale must be strictly positive, got {cities.taste_scale}")

    return v


def ensure_valid(config: EconomyConfig, cities: CityPrimitives) -> None:
    """Raise ConfigError if any invariant is violated."""
    violations = validate_config(config, cities)
    if violations:
        raise ConfigError(violations)
