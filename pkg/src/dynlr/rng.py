"""Seeded, splittable random streams.

All randomness in the library flows through Philox (counter-based), so
per-task streams derived from (master seed, task indices) are reproducible
regardless of execution order.
"""

from __future__ import annotations

import numpy as np

RngLike = "int | np.random.SeedSequence | np.random.Generator"


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the task identified by `key` under `master_seed`."""
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(seq))


def as_rng(seed) -> np.random.Generator:
    """Coerce an int seed, SeedSequence or Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
