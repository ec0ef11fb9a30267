"""Plug-in information estimators for discrete (binarised) spike series.

Pasts are embedded as integers: the state at time ``t`` for history length
``l`` is ``sum_k x[t-k] * 2**(k-1)`` for ``k = 1..l``, i.e. the ``l`` bins
ending at ``t-1``. Estimates that involve a past of length ``l`` use the
samples ``t = l .. n-1`` so AIS, TE and the joint MI share one sample set
and satisfy the chain rule exactly. All values are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .records import InputError

MIN_SAMPLES = 1000


def _check(n, min_samples):
    if n == 0:
        raise InputError("empty series")
    if n < min_samples:
        raise InputError(f"{n} samples, need at least {min_samples}")


def _encode(*columns) -> np.ndarray:
    """Joint symbol index of aligned non-negative integer columns."""
    code = np.zeros(len(columns[0]), dtype=np.int64)
    for c in columns:
        c = np.asarray(c, dtype=np.int64)
        code = code * (int(c.max()) + 1 if len(c) else 1) + c
    return code


def _h(codes) -> float:
    codes = np.asarray(codes)
    if len(codes) and codes.min() >= 0 and codes.max() < 1 << 20:
        counts = np.bincount(codes)
        counts = counts[counts > 0]
    else:
        _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def entropy(series, min_samples: int = MIN_SAMPLES) -> float:
    x = np.asarray(series)
    _check(len(x), min_samples)
    return _h(x)


def mutual_information(x, y, min_samples: int = MIN_SAMPLES) -> float:
    x, y = np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)
    if len(x) != len(y):
        raise InputError("series must be aligned")
    _check(len(x), min_samples)
    return max(0.0, _h(x) + _h(y) - _h(_encode(x, y)))


def conditional_mutual_information(x, y, z, min_samples: int = MIN_SAMPLES) -> float:
    """``I(x : y | z)``."""
    x, y, z = (np.asarray(v, dtype=np.int64) for v in (x, y, z))
    _check(len(x), min_samples)
    return max(0.0, _h(_encode(x, z)) + _h(_encode(y, z)) - _h(_encode(x, y, z)) - _h(z))


def past_states(x, l: int) -> np.ndarray:
    """Embedded past for ``t = l .. n-1``; bit ``k-1`` holds ``x[t-k]``."""
    x = np.asarray(x, dtype=np.int64)
    n = len(x)
    if n <= l:
        raise InputError(f"series of {n} samples too short for history {l}")
    base = int(x.max()) + 1 if n else 2
    code = np.zeros(n - l, dtype=np.int64)
    for k in range(l, 0, -1):
        code = code * base + x[l - k:n - k]
    return code


def ais(x, l: int = 4, min_samples: int = MIN_SAMPLES) -> float:
    """Active information storage ``I(x(t) : x^-(t))``."""
    x = np.asarray(x, dtype=np.int64)
    past = past_states(x, l)
    return mutual_information(x[l:], past, min_samples)


def transfer_entropy(src, tgt, l: int = 4, min_samples: int = MIN_SAMPLES) -> float:
    """``I(tgt(t) : src^-(t) | tgt^-(t))``."""
    src, tgt = np.asarray(src, dtype=np.int64), np.asarray(tgt, dtype=np.int64)
    if len(src) != len(tgt):
        raise InputError("series must be aligned")
    return conditional_mutual_information(tgt[l:], past_states(src, l), past_states(tgt, l),
                                          min_samples)


def joint_mi(tgt, src, l: int = 4, min_samples: int = MIN_SAMPLES) -> float:
    """``I(tgt(t) : tgt^-(t), src^-(t))``."""
    src, tgt = np.asarray(src, dtype=np.int64), np.asarray(tgt, dtype=np.int64)
    both = _encode(past_states(tgt, l), past_states(src, l))
    return mutual_information(tgt[l:], both, min_samples)


def lagged_mi(x, y, tau: int, min_samples: int = MIN_SAMPLES) -> float:
    """``I(x(t) : y(t + tau))``."""
    x, y = np.asarray(x), np.asarray(y)
    if tau < 0 or tau >= len(x):
        raise InputError("lag out of range")
    if tau == 0:
        return mutual_information(x, y, min_samples)
    return mutual_information(x[:-tau], y[tau:], min_samples)


def lagged_mi_curve(x, y, n_tau: int = 100, min_samples: int = MIN_SAMPLES) -> np.ndarray:
    """Lagged MI for ``tau = 1 .. n_tau`` (index 0 holds tau = 1)."""
    if len(x) < n_tau + 1:
        raise InputError(f"series shorter than N_tau + 1 = {n_tau + 1} bins")
    return np.array([lagged_mi(x, y, tau, min_samples) for tau in range(1, n_tau + 1)])


def memory_capacity(x, y, n_tau: int = 100, dt_bin: float = 4.9,
                    min_samples: int = MIN_SAMPLES, curve=None) -> float:
    """``sum_tau dt * (I_tau - I_{N_tau})`` over ``tau = 1 .. N_tau``."""
    if curve is None:
        curve = lagged_mi_curve(x, y, n_tau, min_samples)
    return float(dt_bin * np.sum(curve - curve[-1]))


@dataclass
class InfoResult:
    H: float
    MI: float = float("nan")
    AIS: float = float("nan")
    TE: float = float("nan")
    joint_MI: float = float("nan")
    MC: float = float("nan")
    lagged_MI: np.ndarray = field(default=None, repr=False)

    def normalized(self) -> dict:
        """Each measure divided by the target entropy."""
        h = self.H if self.H > 0 else float("nan")
        return {k: getattr(self, k) / h for k in ("MI", "AIS", "TE", "joint_MI", "MC")}


def pair_info(tgt, src, l: int = 4, min_samples: int = MIN_SAMPLES) -> InfoResult:
    """Pairwise fingerprint of a target neuron and a source neuron."""
    return InfoResult(
        H=entropy(tgt, min_samples),
        MI=mutual_information(tgt, src, min_samples),
        AIS=ais(tgt, l, min_samples),
        TE=transfer_entropy(src, tgt, l, min_samples),
        joint_MI=joint_mi(tgt, src, l, min_samples),
    )
