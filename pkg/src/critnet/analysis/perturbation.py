"""Trial-to-trial distance and susceptibility to a spike pulse."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from ..records import InputError, SpikeRecord
from .binning import bin_indices, population_activity

SILENT = 1e-12


@dataclass
class PerturbationResult:
    vrd: float
    chi: float
    sigma_vrd: float


def gaussian_traces(record: SpikeRecord, sigma: float, dt_int: float, t_max: float,
                    n_sources: int | None = None) -> np.ndarray:
    """Per-source sums of Gaussians sampled at ``k*dt_int`` on ``[0, t_max)``."""
    n_sources = record.n_sources if n_sources is None else n_sources
    n_pts = int(np.ceil(t_max / dt_int - 1e-9))
    grid = np.arange(n_pts) * dt_int
    out = np.zeros((n_sources, n_pts))
    half = int(np.ceil(8 * sigma / dt_int)) + 1
    for src, t in zip(record.sources, record.times):
        c = int(round(t / dt_int))
        lo, hi = max(0, c - half), min(n_pts, c + half + 1)
        if lo >= hi:
            continue
        out[src, lo:hi] += np.exp(-((grid[lo:hi] - t) ** 2) / (2 * sigma**2))
    return out


def vrd(record_m: SpikeRecord, record_n: SpikeRecord, sigma: float = 4.9,
        dt_int: float = 0.1, domain: tuple | None = None) -> float:
    """Normalised squared-difference distance between two trials.

    Integrates ``(a-b)^2/(a+b)^2`` of the Gaussian-filtered traces, summed
    over neurons, with the rectangle rule and divides by ``sigma``. Points
    where both traces are below 1e-12 contribute zero.
    """
    if record_m.n_sources != record_n.n_sources:
        raise InputError("records must have the same number of neurons")
    t0, t1 = (0.0, max(record_m.duration, record_n.duration)) if domain is None else domain
    rm = record_m.window(t0, t1)
    rn = record_n.window(t0, t1)
    a = gaussian_traces(rm, sigma, dt_int, t1 - t0)
    b = gaussian_traces(rn, sigma, dt_int, t1 - t0)
    s = a + b
    active = s >= SILENT
    ratio = np.zeros_like(s)
    ratio[active] = (a[active] - b[active]) ** 2 / s[active] ** 2
    return float(ratio.sum() * dt_int / sigma)


def vrd_trials(records, **kw) -> float:
    """Sum of the distance over all ordered trial pairs ``m != n``."""
    return float(sum(vrd(records[i], records[j], **kw)
                     for i, j in permutations(range(len(records)), 2)))


def susceptibility(record: SpikeRecord, K_ext: int, t_pert: float | None = None,
                   dt_bin: float = 1.9) -> float:
    """``(a(t_pert + dt) - a(t_pert)) / K_ext**2`` at bin width ``dt_bin``."""
    if t_pert is None:
        t_pert = (record.meta or {}).get("t_pert")
    if t_pert is None:
        raise InputError("perturbation time missing")
    if not 0 <= t_pert < record.duration:
        raise InputError(f"t_pert={t_pert} outside the run [0, {record.duration})")
    if K_ext <= 0:
        raise InputError("K_ext must be positive")
    b = int(bin_indices(t_pert, dt_bin))
    a = population_activity(record, dt_bin, n_bins=b + 2)
    return float((a[b + 1] - a[b]) / K_ext**2)
