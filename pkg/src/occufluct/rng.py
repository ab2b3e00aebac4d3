"""Counter-based RNG streams.

Every stochastic component draws from a Philox generator keyed by
(master seed, *stream ids).  Streams with distinct ids are statistically
independent and do not depend on scheduling, so replicate farms reproduce
bit-identically for a fixed (seed, config) regardless of worker count.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Independent generator for the given (seed, ids) key.

    The 128-bit Philox key is built directly from the seed and a 64-bit
    mix of the stream ids, so the mapping is stable across processes.
    """
    mix = np.uint64(0x9E3779B97F4A7C15)
    h = np.uint64(len(ids))
    for i in ids:
        h = np.uint64((int(h) ^ (int(i) & _MASK64)) & _MASK64)
        h = np.uint64((int(h) * int(mix)) & _MASK64)
    key = (int(seed) & _MASK64) | (int(h) << 64)
    return np.random.Generator(np.random.Philox(key=key))
