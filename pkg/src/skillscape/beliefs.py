"""Bayesian learning about wages from migration-weighted local observations.

Students observe kappa wage draws, allocated across destinations by the
migration matrix and across majors by the origin's skill composition.
Signal precision per (origin, major, destination) cell is

    P = kappa * M * delta / (sigma2_xi + sigma2_xihat)

and posterior updating is conjugate multivariate normal.  Under diffuse
priors the posterior variance is simply 1/P, with an infinite-variance
sentinel for cells that receive no observations (those options are never
learnable and carry zero choice probability downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg


@dataclass(frozen=True)
class GaussianBelief:
    """Mean vector and covariance matrix over wage cells."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match "
                             f"mean of length {mean.size}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("cov must be symmetric")
        if np.any(np.diag(cov) < 0):
            raise ValueError("cov diagonal must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def signal_precision(sigma2_xi, sigma2_xihat, kappa_obs, mig_share, major_share):
    """Diagonal signal precision, elementwise over any broadcastable shapes.

    Zero migration or zero major share yields zero precision (no signal).
    """
    sigma2_xi = np.asarray(sigma2_xi, dtype=float)
    sigma2_xihat = np.asarray(sigma2_xihat, dtype=float)
    total_var = sigma2_xi + sigma2_xihat
    if np.any(total_var <= 0):
        raise ValueError("degenerate signal variance: sigma2_xi + sigma2_xihat "
                         "must be strictly positive")
    out = kappa_obs * np.asarray(mig_share, dtype=float) \
        * np.asarray(major_share, dtype=float) / total_var
    if out.ndim == 0:
        return float(out)
    return out


def posterior_diffuse(sigma2_xi, sigma2_xihat, kappa_obs, mig_share, major_share):
    """Posterior variance under a diffuse prior: reciprocal precision.

    Cells with no observations (mig_share * major_share == 0) return +inf,
    the sentinel that maps to utility -inf and choice probability 0.
    """
    p = np.asarray(signal_precision(sigma2_xi, sigma2_xihat, kappa_obs,
                                    mig_share, major_share), dtype=float)
    # subnormal precisions overflow to the same +inf sentinel as exact zeros
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(p > 0, 1.0 / np.where(p > 0, p, 1.0), np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def posterior_update(prior: GaussianBelief, signal_mean, precision) -> GaussianBelief:
    """Conjugate normal update with diagonal signal precision.

    Returns N((Sigma^-1 + P)^-1 (Sigma^-1 mu0 + P mu), (Sigma^-1 + P)^-1),
    computed through symmetric positive-definite factorizations; explicit
    matrix inversion exists only in the test oracle.
    """
    signal_mean = np.asarray(signal_mean, dtype=float)
    precision = np.asarray(precision, dtype=float)
    if signal_mean.shape != (prior.dim,) or precision.shape != (prior.dim,):
        raise ValueError("signal_mean and precision must match prior dimension")
    if np.any(precision < 0):
        raise ValueError("precision entries must be nonnegative")
    if not np.any(precision > 0):
        # no information: posterior is the prior, exactly
        return prior

    try:
        prior_chol = linalg.cho_factor(prior.cov, lower=True)
    except linalg.LinAlgError as e:
        raise ValueError("prior not invertible; use posterior_diffuse for "
                         "diffuse-prior beliefs") from e

    eye = np.eye(prior.dim)
    prior_inv = linalg.cho_solve(prior_chol, eye)
    a = prior_inv + np.diag(precision)
    a_chol = linalg.cho_factor(a, lower=True)
    post_cov = linalg.cho_solve(a_chol, eye)
    post_cov = 0.5 * (post_cov + post_cov.T)
    rhs = prior_inv @ prior.mean + precision * signal_mean
    post_mean = linalg.cho_solve(a_chol, rhs)
    return GaussianBelief(mean=post_mean, cov=post_cov)
