"""Effective wages and Frechet choice structure.

The decision-relevant payoff of option (m, c) for a student from c0 is the
posterior mean wage net of a CARA risk penalty and tuition (for college
cells), or the non-tradable wage (for m=0 cells).  Choice probabilities
and the market potential are the standard Frechet/logit objects over the
utility argument

    u = omega - lambda * p_n - p_h + a - d

computed in log-space with max subtraction so that no fixture can
overflow before the solver does its job.  Cells with an infinite posterior
variance carry the -inf sentinel and receive probability exactly zero.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

NEG_INF = -np.inf


def effective_wage(post_mean, sigma2_xi, post_var, tuition, p_n, is_college):
    """Risk-adjusted payoff of one cell (vectorized over broadcastable inputs).

    College cells: post_mean - (sigma2_xi + post_var)/2 - tuition, with the
    -inf sentinel wherever post_var is infinite.  Non-college cells: p_n.
    """
    post_mean = np.asarray(post_mean, dtype=float)
    post_var = np.asarray(post_var, dtype=float)
    finite = np.isfinite(post_var)
    with np.errstate(over="ignore"):
        penalty = 0.5 * (np.asarray(sigma2_xi, dtype=float)
                         + np.where(finite, post_var, 0.0))
        college_value = np.where(
            finite, post_mean - penalty - np.asarray(tuition, dtype=float),
            NEG_INF)
    out = np.where(is_college, college_value, np.asarray(p_n, dtype=float))
    if out.ndim == 0:
        return float(out)
    return out


def simplified_effective_wage(rho, h, delta_dest, gamma_agg, sigma2_tilde,
                              zeta_tilde, gamma_sig, tau, delta_origin,
                              is_origin, tuition=0.0):
    """Two-skill effective wage used by the estimation and counterfactual blocks.

    The productivity term uses the destination college fraction; the signal
    penalty uses the origin college fraction, attenuated by (1 + tau) when
    the destination is not the origin.  A zero origin fraction means no
    local signal and returns the -inf sentinel.
    """
    rho = np.asarray(rho, dtype=float)
    delta_dest = np.asarray(delta_dest, dtype=float)
    delta_origin = np.asarray(delta_origin, dtype=float)
    mean_wage = rho * np.asarray(h, dtype=float) * delta_dest ** gamma_agg
    attenuation = 1.0 + tau * (~np.asarray(is_origin, dtype=bool))
    with np.errstate(divide="ignore"):
        penalty = np.where(delta_origin > 0,
                           zeta_tilde * np.where(delta_origin > 0, delta_origin, 1.0)
                           ** (-gamma_sig) * attenuation,
                           np.inf)
    out = np.where(np.isfinite(penalty),
                   mean_wage - sigma2_tilde - np.where(np.isfinite(penalty), penalty, 0.0)
                   - tuition,
                   NEG_INF)
    if out.ndim == 0:
        return float(out)
    return out


def _utility_argument(omega, p_n, p_h, a, d, lam):
    """theta-free utility argument per cell; shapes (C0, nm, C)."""
    omega = np.asarray(omega, dtype=float)
    cost = lam * np.asarray(p_n, dtype=float) + np.asarray(p_h, dtype=float) \
        - np.asarray(a, dtype=float)
    u = omega - cost[None, None, :] - np.asarray(d, dtype=float)[:, None, :]
    return u


def _log_weights(omega, p_n, p_h, a, d, taste, theta, lam):
    u = _utility_argument(omega, p_n, p_h, a, d, lam)
    with np.errstate(divide="ignore", over="ignore"):
        log_t = np.log(np.broadcast_to(np.asarray(taste, dtype=float), u.shape))
        # -inf sentinels stay -inf; huge finite penalties may overflow there too
        scaled = np.where(np.isneginf(u), NEG_INF,
                          theta * np.where(np.isneginf(u), 0.0, u))
    return scaled + log_t


def choice_probabilities(omega, p_n, p_h, a, d, taste, theta, lam):
    """Frechet choice tensor P(c, m | c0), normalized per origin.

    ``omega`` has shape (C0, nm, C) over whatever major slices the caller
    supplies (the full model passes M+1 slices with m=0 first).  Rows sum
    to one over all (m, c) cells; -inf sentinel cells get exactly zero.
    """
    logw = _log_weights(omega, p_n, p_h, a, d, taste, theta, lam)
    flat = logw.reshape(logw.shape[0], -1)
    norm = logsumexp(flat, axis=1)
    if np.any(np.isneginf(norm)):
        bad = np.where(np.isneginf(norm))[0]
        raise ValueError(f"origin has no feasible option: {bad.tolist()}")
    p = np.exp(flat - norm[:, None]).reshape(logw.shape)
    return p


def market_potential(omega, p_n, p_h, a, d, taste, theta, lam):
    """Inclusive value per origin: Phi and log Phi.

    Phi is the denominator of the choice probabilities.  The level can
    overflow for large theta * utility; log Phi is always finite for a
    feasible origin, so both are returned.
    """
    logw = _log_weights(omega, p_n, p_h, a, d, taste, theta, lam)
    log_phi = logsumexp(logw.reshape(logw.shape[0], -1), axis=1)
    with np.errstate(over="ignore"):
        phi = np.exp(log_phi)
    return phi, log_phi


def college_value(phi, theta, xi_const, log_phi=None):
    """Expected value of entering the choice stage: xi * Phi**(1/theta).

    Pass ``log_phi`` to stay in log space when the level overflowed.
    """
    if log_phi is not None:
        return xi_const * np.exp(np.asarray(log_phi, dtype=float) / theta)
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0):
        raise ValueError("market potential must be strictly positive")
    out = xi_const * phi ** (1.0 / theta)
    if out.ndim == 0:
        return float(out)
    return out


def unskilled_value(lam, p_n, a, p_h, d_row=0.0):
    """Deterministic value of living in each city without a degree.

    (1 - lambda) * p_n + a - p_h - d; equalized across cities in
    equilibrium when moving costs are zero.
    """
    out = (1.0 - lam) * np.asarray(p_n, dtype=float) + np.asarray(a, dtype=float) \
        - np.asarray(p_h, dtype=float) - np.asarray(d_row, dtype=float)
    if out.ndim == 0:
        return float(out)
    return out
