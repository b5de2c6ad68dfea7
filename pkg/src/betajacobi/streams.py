"""Keyed counter-based random streams.

Each stream is a Philox generator whose 128-bit key packs the 64-bit master
seed with a 64-bit stream id, so stream ``i`` depends only on ``(seed, i)``
and never on how the work was split between processes. ``replica`` gives
statistically independent repeats of an experiment under one master seed.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# top bits of the stream id separate unrelated consumers
PATHS = 0
CHAINS = 1


def stream(seed: int, index: int, purpose: int = PATHS, replica: int = 0) -> np.random.Generator:
    if seed < 0 or seed > MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    if index < 0 or index >= 1 << 40:
        raise ValueError(f"stream index out of range: {index}")
    if replica < 0 or replica >= 1 << 16:
        raise ValueError(f"replica out of range: {replica}")
    sid = (purpose << 56) | (replica << 40) | index
    return np.random.Generator(np.random.Philox(key=(sid << 64) | seed))
