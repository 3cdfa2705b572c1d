"""Seeded random number generation.

Every sampler and trainer draws from ``numpy.random.Philox``, a counter-based
bit generator whose streams are identical across platforms for a given seed.
"""

from __future__ import annotations

import numpy as np

SEED_MODULUS = 2**64


def normalize_seed(seed: int) -> int:
    """Reduce any Python integer to the unsigned 64-bit range."""

    return int(seed) % SEED_MODULUS


def make_rng(seed: int) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed``."""

    return np.random.Generator(np.random.Philox(normalize_seed(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Mix a base seed and a row index into an independent 64-bit seed."""

    sequence = np.random.SeedSequence([normalize_seed(seed), normalize_seed(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


__all__ = ["derive_seed", "make_rng", "normalize_seed"]
