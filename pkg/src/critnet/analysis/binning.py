"""Temporal binning of spike records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..records import InputError, SpikeRecord

# absorbs float error in t/dt for grid-aligned spike times
_EPS = 1e-9


@dataclass
class BinnedSeries:
    counts: np.ndarray  # (n_sources, n_bins)
    dt_bin: float

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    @property
    def binary(self) -> np.ndarray:
        return np.minimum(self.counts, 1).astype(np.int8)

    @property
    def population(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def bin_indices(times, dt_bin):
    return np.floor(np.asarray(times, dtype=float) / dt_bin + _EPS).astype(np.int64)


def bin_record(record: SpikeRecord, dt_bin: float, n_bins: int | None = None) -> BinnedSeries:
    """Count spikes per source in bins ``[t*dt_bin, (t+1)*dt_bin)``."""
    if dt_bin <= 0:
        raise InputError("dt_bin must be positive")
    if n_bins is None:
        n_bins = int(np.floor(record.duration / dt_bin + _EPS))
        if len(record.times):
            n_bins = max(n_bins, int(bin_indices(record.times.max(), dt_bin)) + 1)
    n_src = max(record.n_sources, int(record.sources.max()) + 1 if len(record) else 0)
    counts = np.zeros((n_src, n_bins), dtype=np.int64)
    idx = bin_indices(record.times, dt_bin)
    ok = idx < n_bins
    np.add.at(counts, (record.sources[ok], idx[ok]), 1)
    return BinnedSeries(counts, dt_bin)


def population_activity(record: SpikeRecord, dt_bin: float, n_bins: int | None = None) -> np.ndarray:
    return bin_record(record, dt_bin, n_bins).population


def mean_iei(record: SpikeRecord) -> float:
    """Mean gap between consecutive events of the merged population train."""
    if len(record) < 2:
        raise InputError("need at least two events for an inter-event interval")
    t = np.sort(record.times)
    return float(np.mean(np.diff(t)))
