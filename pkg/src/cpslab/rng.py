"""Seeded, splittable random streams.

Every stochastic entry point takes an integer seed and derives independent
substreams from (seed, key...) with a counter-based bit generator, so results
are reproducible across platforms and thread schedules.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator on the substream identified by (seed, key)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key)))
    )
