"""Counter-based random substreams.

Every replica draws from its own Philox stream whose key is derived from the
master seed and whose counter starts at ``index * 2**128``.  Substreams never
overlap in practice and do not depend on how replicas are scheduled across
workers.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=256)
def _key(seed: int, salt: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed) & (2**64 - 1), int(salt)]).generate_state(2, np.uint64)


def substream(seed: int, index: int, salt: int = 0) -> np.random.Generator:
    """Generator for replica ``index`` under master ``seed``."""
    return np.random.Generator(
        np.random.Philox(key=_key(seed, salt), counter=[0, 0, int(index), 0])
    )


def substreams(seed: int, start: int, stop: int, salt: int = 0):
    key = _key(seed, salt)
    for i in range(start, stop):
        yield np.random.Generator(np.random.Philox(key=key, counter=[0, 0, i, 0]))
