"""Avalanche sizes and discrete maximum-likelihood fits of their distribution.

All models are discrete and normalised by explicit summation over the
support ``[s_min, s_max]`` (``s_max`` capped at ``S_MAX``), so samples
outside the fit range are dropped rather than censored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

S_MAX = 10**6
MIN_SAMPLES = 50


class InsufficientData(ValueError):
    pass


class FitError(RuntimeError):
    pass


def extract_avalanches(activity) -> np.ndarray:
    """Sizes of maximal runs of non-empty bins."""
    a = np.asarray(activity)
    if a.size == 0:
        return np.zeros(0, dtype=np.int64)
    active = a > 0
    edges = np.diff(np.concatenate([[0], active.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    csum = np.concatenate([[0], np.cumsum(a)])
    return (csum[stops] - csum[starts]).astype(np.int64)


def _support(fit_range):
    lo = int(fit_range[0])
    hi = S_MAX if fit_range[1] is None else int(min(fit_range[1], S_MAX))
    return lo, hi


def _in_range(sizes, fit_range):
    lo, hi = _support(fit_range)
    s = np.asarray(sizes)
    s = s[(s >= lo) & (s <= hi)]
    if len(s) < MIN_SAMPLES:
        raise InsufficientData(f"{len(s)} sizes in [{lo}, {hi}], need {MIN_SAMPLES}")
    return s.astype(float)


def _log_norm(log_terms):
    return special.logsumexp(log_terms)


def tpl_logpmf(s, alpha, s_cut, fit_range):
    lo, hi = _support(fit_range)
    grid = np.arange(lo, hi + 1, dtype=float)
    log_z = _log_norm(-alpha * np.log(grid) - grid / s_cut)
    s = np.asarray(s, dtype=float)
    return -alpha * np.log(s) - s / s_cut - log_z


def pl_logpmf(s, alpha, fit_range):
    lo, hi = _support(fit_range)
    if hi >= S_MAX and alpha > 1:
        log_z = np.log(special.zeta(alpha, lo) - special.zeta(alpha, hi + 1))
    else:
        grid = np.arange(lo, hi + 1, dtype=float)
        log_z = _log_norm(-alpha * np.log(grid))
    return -alpha * np.log(np.asarray(s, dtype=float)) - log_z


def exp_logpmf(s, beta, fit_range):
    lo, hi = _support(fit_range)
    lam = 1.0 / beta
    # geometric series over [lo, hi]
    log_z = -lam * lo - np.log1p(-np.exp(-lam)) + np.log1p(-np.exp(-lam * (hi - lo + 1)))
    return -lam * np.asarray(s, dtype=float) - log_z


@dataclass
class AvalancheFit:
    sizes: np.ndarray
    alpha_s: float
    s_cut: float
    fit_range: tuple
    loglik_pl: float
    loglik_exp: float
    preferred: str
    lr: float
    lr_p_value: float


def fit_truncated_powerlaw(sizes, fit_range=(4, 96), x0=None, tol=1e-6):
    """MLE of ``P(s) ~ s**-alpha * exp(-s/s_cut)`` on the fit range.

    Nelder-Mead over ``(alpha, log s_cut)`` from ``(1.5, log x0)``.
    Returns ``(alpha, s_cut, loglik)``.
    """
    s = _in_range(sizes, fit_range)
    lo, hi = _support(fit_range)
    grid = np.arange(lo, hi + 1, dtype=float)
    log_grid = np.log(grid)
    n, sum_log, sum_s = len(s), np.log(s).sum(), s.sum()

    def nll(theta):
        alpha, log_cut = theta
        if not -20 < log_cut < 30:
            return np.inf
        inv = np.exp(-log_cut)
        log_z = _log_norm(-alpha * log_grid - grid * inv)
        return alpha * sum_log + inv * sum_s + n * log_z

    if x0 is None:
        x0 = hi / 3 if hi < S_MAX else 100.0
    res = optimize.minimize(nll, [1.5, np.log(x0)], method="Nelder-Mead",
                            options={"fatol": tol, "xatol": 1e-8, "maxiter": 5000,
                                     "maxfev": 10000})
    if not res.success or not np.isfinite(res.fun):
        raise FitError(f"truncated power-law fit did not converge: {res.message} "
                       f"(x={res.x}, nll={res.fun})")
    return float(res.x[0]), float(np.exp(res.x[1])), float(-res.fun)


def fit_powerlaw(sizes, fit_range=(4, 96)):
    """MLE exponent of a pure discrete power law; returns ``(alpha, loglik)``."""
    s = _in_range(sizes, fit_range)
    sum_log = np.log(s).sum()
    n = len(s)

    def nll(alpha):
        # pl_logpmf(1) is minus the log normaliser
        return alpha * sum_log - n * pl_logpmf(1.0, alpha, fit_range)

    res = optimize.minimize_scalar(nll, bounds=(-5.0, 10.0), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x), float(-res.fun)


def fit_exponential(sizes, fit_range=(4, 96)):
    """MLE scale ``beta`` of ``P(s) ~ exp(-s/beta)``; returns ``(beta, loglik)``."""
    s = _in_range(sizes, fit_range)

    def nll(log_beta):
        return -exp_logpmf(s, np.exp(log_beta), fit_range).sum()

    res = optimize.minimize_scalar(nll, bounds=(-8.0, 16.0), method="bounded",
                                   options={"xatol": 1e-10})
    return float(np.exp(res.x)), float(-res.fun)


def vuong(loglik_a, loglik_b):
    """Normalised log-likelihood ratio and two-sided p-value."""
    d = np.asarray(loglik_a) - np.asarray(loglik_b)
    n = len(d)
    lr = float(d.sum())
    sigma = float(d.std())
    if sigma == 0 or n == 0:
        return lr, 0.0, 1.0
    z = lr / (sigma * np.sqrt(n))
    p = float(special.erfc(abs(z) / np.sqrt(2)))
    return lr, z, p


def compare_models(sizes, fit_range=(4, 96), alpha_level=0.05):
    """Power law against exponential on the same range.

    Returns ``(preferred, lr, p_value)`` with preferred one of
    ``"power-law"``, ``"exponential"`` or ``"undecided"``.
    """
    s = _in_range(sizes, fit_range)
    alpha, _ = fit_powerlaw(s, fit_range)
    beta, _ = fit_exponential(s, fit_range)
    lr, _, p = vuong(pl_logpmf(s, alpha, fit_range), exp_logpmf(s, beta, fit_range))
    if p < alpha_level and lr > 0:
        preferred = "power-law"
    elif p < alpha_level and lr < 0:
        preferred = "exponential"
    else:
        preferred = "undecided"
    return preferred, lr, p


def avalanche_fit(sizes, fit_range=(4, 96)) -> AvalancheFit:
    sizes = np.asarray(sizes)
    alpha, s_cut, _ = fit_truncated_powerlaw(sizes, fit_range)
    s = _in_range(sizes, fit_range)
    a_pl, ll_pl = fit_powerlaw(s, fit_range)
    beta, ll_exp = fit_exponential(s, fit_range)
    preferred, lr, p = compare_models(s, fit_range)
    return AvalancheFit(sizes, alpha, s_cut, tuple(fit_range), ll_pl, ll_exp, preferred, lr, p)


def sample_truncated_powerlaw(alpha, s_cut, n, s_min=1, s_max=S_MAX, rng=None):
    """Inverse-CDF sampling from the discrete truncated power law."""
    rng = np.random.default_rng(rng)
    grid = np.arange(s_min, s_max + 1, dtype=float)
    logp = -alpha * np.log(grid) - grid / s_cut
    p = np.exp(logp - logp.max())
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return grid[np.minimum(idx, len(grid) - 1)].astype(np.int64)
