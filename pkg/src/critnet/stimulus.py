"""Input spike trains: independent or shared Poisson, replay, perturbation pulses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ConfigError
from .records import SpikeRecord


@dataclass(frozen=True)
class StimulusConfig:
    kind: str = "independent-poisson"
    nu: float = 29.0
    n_sources: int = 32
    duration: float = 1000.0
    seed: int = 0
    dt: float = 0.1
    t_pert: float | None = None
    n_pert: int = 0

    def __post_init__(self):
        if self.kind not in ("independent-poisson", "shared-poisson", "replay"):
            raise ConfigError(f"unknown stimulus kind {self.kind!r}")
        if self.nu < 0:
            raise ConfigError("nu must be non-negative")
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        if self.t_pert is not None:
            if not 0 <= self.t_pert < self.duration:
                raise ConfigError("t_pert must lie within the stimulus duration")
            if not 0 <= self.n_pert <= self.n_sources:
                raise ConfigError("n_pert must not exceed n_sources")


def poisson_train(rate_hz: float, duration: float, rng: np.random.Generator,
                  dt: float | None = None) -> np.ndarray:
    """Homogeneous Poisson spike times (ms) by exponential inter-arrivals.

    With ``dt`` the times are snapped down to the grid and same-slot
    duplicates merged.
    """
    if rate_hz <= 0 or duration <= 0:
        return np.zeros(0)
    mean_isi = 1000.0 / rate_hz
    n_guess = int(duration / mean_isi + 6 * np.sqrt(duration / mean_isi) + 16)
    times = np.cumsum(rng.exponential(mean_isi, size=n_guess))
    while times[-1] < duration:
        more = times[-1] + np.cumsum(rng.exponential(mean_isi, size=n_guess))
        times = np.concatenate([times, more])
    times = times[times < duration]
    if dt is not None:
        times = np.unique(np.floor(times / dt + 1e-9)) * dt
        times = times[times < duration]
    return times


def generate(config: StimulusConfig) -> SpikeRecord:
    rng = np.random.default_rng(config.seed)
    n = config.n_sources
    if config.kind == "replay":
        raise ConfigError("replay stimuli are produced by replay(record)")
    if config.kind == "shared-poisson":
        base = poisson_train(config.nu, config.duration, rng, config.dt)
        sources = np.tile(np.arange(n), len(base))
        times = np.repeat(base, n)
    else:
        trains = [poisson_train(config.nu, config.duration, rng, config.dt) for _ in range(n)]
        sources = np.concatenate([np.full(len(t), i) for i, t in enumerate(trains)]) \
            if n else np.zeros(0, np.int64)
        times = np.concatenate(trains) if n else np.zeros(0)
    meta = {}
    if config.t_pert is not None and config.n_pert > 0:
        t_p = np.floor(config.t_pert / config.dt + 1e-9) * config.dt if config.dt else config.t_pert
        extra = rng.choice(n, size=config.n_pert, replace=False)
        sources = np.concatenate([sources, extra])
        times = np.concatenate([times, np.full(config.n_pert, t_p)])
        meta["pert_sources"] = np.sort(extra).tolist()
    if config.t_pert is not None:
        meta["t_pert"] = config.t_pert
        meta["n_pert"] = config.n_pert
    order = np.lexsort((sources, times))
    return SpikeRecord(sources[order], times[order], "stimulus", config.duration, n,
                       meta=meta or None)


def replay(record: SpikeRecord) -> SpikeRecord:
    """An identical, independent copy of a stored stimulus."""
    meta = dict(record.meta) if record.meta else None
    return SpikeRecord(record.sources.copy(), record.times.copy(), record.kind,
                       record.duration, record.n_sources, meta=meta)


def jitter(record: SpikeRecord, sigma: float, rng, dt: float | None = None) -> SpikeRecord:
    """Copy of ``record`` with every event shifted by Gaussian noise of width ``sigma`` ms.

    Stands in for the temporal noise that makes two presentations of the
    same input differ. Perturbation-pulse events (those at ``t_pert`` on
    the pulse sources listed in ``meta``) are left in place. Shifted times
    are snapped to the ``dt`` grid and clipped to ``[0, duration)``;
    same-slot duplicates on a source are merged.
    """
    rng = np.random.default_rng(rng)
    times = record.times.astype(float).copy()
    sources = record.sources.copy()
    move = np.ones(len(times), dtype=bool)
    meta = record.meta or {}
    if meta.get("pert_sources") and meta.get("t_pert") is not None:
        t_p = float(meta["t_pert"])
        if dt:
            t_p = np.floor(t_p / dt + 1e-9) * dt
        pulse = np.isclose(times, t_p) & np.isin(sources, meta["pert_sources"])
        move &= ~pulse
    if sigma > 0:
        times[move] += rng.normal(0.0, sigma, size=int(move.sum()))
    if dt:
        times = np.floor(times / dt + 1e-9) * dt
    hi = np.nextafter(record.duration, 0) if not dt else record.duration - dt
    times = np.clip(times, 0.0, max(hi, 0.0))
    order = np.lexsort((times, sources))
    sources, times = sources[order], times[order]
    if dt:
        slot = np.round(times / dt).astype(np.int64)
        keep = np.ones(len(times), dtype=bool)
        keep[1:] = (sources[1:] != sources[:-1]) | (slot[1:] != slot[:-1])
        sources, times = sources[keep], times[keep]
    order = np.lexsort((sources, times))
    return SpikeRecord(sources[order], times[order], record.kind, record.duration,
                       record.n_sources, meta=dict(meta) or None)
