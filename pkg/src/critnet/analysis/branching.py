"""Branching ratio, autocorrelation time and Fano factor of population activity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize


class RegressionError(ValueError):
    pass


class FitDegenerate(ValueError):
    pass


@dataclass
class BranchingEstimate:
    m: float
    h: float
    tau_branch: float
    tau_corr: float = float("nan")
    fano: float = float("nan")


def tau_from_m(m: float, dt_bin: float) -> float:
    if 0 < m < 1:
        return -dt_bin / np.log(m)
    return float("inf") if m >= 1 else float("nan")


def estimate_branching(activity, dt_bin: float = 4.9, min_bins: int = 100) -> BranchingEstimate:
    """OLS regression of ``a(t+1)`` on ``a(t)``."""
    a = np.asarray(activity, dtype=float)
    if len(a) < min_bins:
        raise RegressionError(f"need at least {min_bins} bins, got {len(a)}")
    x, y = a[:-1], a[1:]
    vx = np.var(x)
    if vx == 0:
        raise RegressionError("activity has zero variance")
    m = float(np.mean((x - x.mean()) * (y - y.mean())) / vx)
    h = float(y.mean() - m * x.mean())
    return BranchingEstimate(m, h, tau_from_m(m, dt_bin))


def autocorrelation(activity, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags ``0..max_lag``.

    Each lag sums over the overlapping part only and divides by the full
    ``n * var``, so larger lags are shrunk towards zero (biased estimator).
    """
    a = np.asarray(activity, dtype=float)
    d = a - a.mean()
    n = len(a)
    denom = n * a.var()
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(d, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    return acov / denom


def fit_exponential_decay(lags, rho) -> float:
    """Least-squares ``A*exp(-lag/tau)`` fit with free amplitude; returns ``tau`` in lags."""
    lags = np.asarray(lags, dtype=float)
    rho = np.asarray(rho, dtype=float)
    r1 = rho[0] ** (1.0 / lags[0]) if rho[0] > 0 else 1e-6
    tau0 = -1.0 / np.log(min(max(r1, 1e-6), 0.999999))

    def model(k, amp, tau):
        return amp * np.exp(-k / tau)

    try:
        (_, tau), _ = optimize.curve_fit(model, lags, rho,
                                         p0=[rho[0] * np.exp(lags[0] / tau0), tau0],
                                         bounds=([0, 1e-6], [np.inf, 1e6]), maxfev=20000)
    except RuntimeError as err:
        raise FitDegenerate(str(err)) from err
    return float(tau)


def autocorrelation_time(activity, dt_bin: float = 4.9, max_lag: int | None = None) -> float:
    """Time constant (ms) of an exponential ``A*exp(-lag/tau)`` fit to the ACF.

    The fit uses lags ``1..min(200, n/10)`` with a free amplitude.
    """
    a = np.asarray(activity, dtype=float)
    if np.var(a) == 0:
        raise FitDegenerate("activity has zero variance")
    if max_lag is None:
        max_lag = int(min(200, len(a) // 10))
    max_lag = max(max_lag, 2)
    rho = autocorrelation(a, max_lag)
    if rho[1] <= 0:
        raise FitDegenerate(f"non-positive autocorrelation at lag 1 ({rho[1]:.3g})")
    lags = np.arange(1, max_lag + 1, dtype=float)
    tau = fit_exponential_decay(lags, rho[1:])
    return float(tau * dt_bin)


def fano(activity) -> float:
    a = np.asarray(activity, dtype=float)
    mu = a.mean() if len(a) else 0.0
    if mu <= 0:
        raise ValueError("Fano factor undefined for a silent network")
    return float(a.var() / mu)


def analyze_population(activity, dt_bin: float = 4.9) -> BranchingEstimate:
    est = estimate_branching(activity, dt_bin)
    try:
        est.tau_corr = autocorrelation_time(activity, dt_bin)
    except FitDegenerate:
        est.tau_corr = float("nan")
    est.fano = fano(activity)
    return est
