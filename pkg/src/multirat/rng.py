"""Reproducible random streams.

Every random draw in the package comes from a generator addressed by a key
``(root_seed, purpose, *indices)``.  The key is fed to ``numpy.random.SeedSequence``
as ``entropy=root_seed, spawn_key=(purpose, *indices)`` and the resulting state
seeds a Philox counter-based bit generator.  Two keys that differ anywhere give
statistically independent streams, and the same key always gives the same
stream, whatever the worker count or execution order.
"""
from __future__ import annotations

import numpy as np

# stream purposes; fixed integers so that keys stay stable across releases
APS = 0
USERS = 1
CONTENTION = 2
LINKS = 3
TYPICAL = 4
AUX = 5

_MASK64 = (1 << 64) - 1


def stream(root_seed: int, purpose: int, *indices: int) -> np.random.Generator:
    if root_seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(entropy=int(root_seed) & _MASK64,
                                spawn_key=(int(purpose), *(int(i) for i in indices)))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(root_seed: int, *indices: int) -> int:
    """A 64-bit child seed; used to hand one integer seed to a per-trial task."""
    ss = np.random.SeedSequence(entropy=int(root_seed) & _MASK64,
                                spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
