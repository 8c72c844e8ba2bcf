"""Seeded random streams: numpy Generator over PCG64."""
from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy.PCG64"

SeedLike = int | np.random.Generator | None


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))

