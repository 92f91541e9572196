"""Seed handling.

Every sampler and experiment takes an explicit seed; sub-tasks derive
independent streams as ``SeedSequence([seed, *indices])`` so that a run is
reproducible bit-for-bit and parallel points do not share streams.
"""
from __future__ import annotations

import numpy as np

__all__ = ["as_generator", "derive_rng"]


def as_generator(seed: int | np.random.Generator | None) -> np.random.Generator:
    """Accept a seed, a generator, or None (fresh entropy)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic child stream for (seed, task indices)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))
