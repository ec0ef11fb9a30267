"""Counter-based seed derivation.

Every random stream in an experiment is keyed by the master seed plus a
tuple of labels such as ``("burnin", K_ext, seed_index)``. The derived
seed does not depend on the order in which grid cells are executed, so a
single cell rerun in isolation reproduces the numbers of a full sweep.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_word(part) -> int:
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    return zlib.crc32(repr(part).encode())


def derive_seed(master: int, *keys) -> int:
    """A 63-bit seed for the stream identified by ``keys`` under ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key_word(k) for k in keys))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int((int(hi) << 31) ^ int(lo))


def derive_rng(master: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
