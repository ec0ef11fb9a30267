"""Spike records and the on-disk formats for spikes and weights."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Raised when an input record or series is unusable."""


@dataclass
class SpikeRecord:
    """Time-ordered (source, time) events.

    ``times`` are in ms and lie in ``[0, duration)``.
    """

    sources: np.ndarray
    times: np.ndarray
    kind: str = "neuron"
    duration: float = 0.0
    n_sources: int = 0
    meta: dict | None = None

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=float)
        if self.sources.shape != self.times.shape:
            raise InputError("sources and times must have equal length")
        if len(self.times) and np.any(np.diff(self.times) < 0):
            order = np.argsort(self.times, kind="stable")
            self.sources, self.times = self.sources[order], self.times[order]

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, SpikeRecord):
            return NotImplemented
        return (self.kind == other.kind and self.duration == other.duration
                and self.n_sources == other.n_sources
                and np.array_equal(self.sources, other.sources)
                and np.array_equal(self.times, other.times))

    @classmethod
    def empty(cls, kind="neuron", duration=0.0, n_sources=0):
        return cls(np.zeros(0, np.int64), np.zeros(0), kind, duration, n_sources)

    def trains(self) -> list[np.ndarray]:
        """Per-source spike-time arrays."""
        return [self.times[self.sources == i] for i in range(self.n_sources)]

    def window(self, t0: float, t1: float, shift: bool = True) -> "SpikeRecord":
        sel = (self.times >= t0) & (self.times < t1)
        times = self.times[sel] - (t0 if shift else 0.0)
        return SpikeRecord(self.sources[sel], times, self.kind,
                           (t1 - t0) if shift else t1, self.n_sources)

    def rates(self) -> np.ndarray:
        """Per-source firing rate in Hz."""
        if self.duration <= 0:
            return np.zeros(self.n_sources)
        counts = np.bincount(self.sources, minlength=self.n_sources)
        return counts / (self.duration / 1000.0)


_HEADER = re.compile(r"#\s*kind=(\w+)\s+duration_ms=(\S+)\s+n_sources=(\d+)")


def write_spikes(record: SpikeRecord, path) -> None:
    """Write ``source_id<TAB>time_ms`` lines under a one-line header."""
    buf = io.StringIO()
    buf.write(f"# kind={record.kind} duration_ms={record.duration!r} "
              f"n_sources={record.n_sources}\n")
    for s, t in zip(record.sources.tolist(), record.times.tolist()):
        buf.write(f"{s}\t{t!r}\n")
    Path(path).write_text(buf.getvalue())


def read_spikes(path) -> SpikeRecord:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InputError(f"{path}: empty spike file")
    m = _HEADER.match(lines[0])
    if m is None:
        raise InputError(f"{path}: malformed header {lines[0]!r}")
    kind, duration, n_sources = m.group(1), float(m.group(2)), int(m.group(3))
    src, times = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        a, b = line.split("\t")
        src.append(int(a))
        times.append(float(b))
    return SpikeRecord(np.array(src, np.int64), np.array(times), kind, duration, n_sources)


def write_weights(matrix: np.ndarray, path) -> None:
    """Row-major weight matrix as CSV with a header row of column indices."""
    matrix = np.atleast_2d(matrix)
    header = ",".join(str(i) for i in range(matrix.shape[1]))
    np.savetxt(path, matrix, delimiter=",", header=header, comments="", fmt="%.17g")


def read_weights(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
