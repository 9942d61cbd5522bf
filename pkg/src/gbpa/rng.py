"""Seed handling.

Every run owns explicit 64-bit seeds. Streams are Philox (counter-based)
bit generators keyed through ``numpy.random.SeedSequence`` so that the
sampling, resampling and environment streams of one run never overlap.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1

# Substream indices spawned from a run seed.
SAMPLING = 0
RESAMPLING = 1
ENVIRONMENT = 2
ANALYSIS = 3  # Monte Carlo used only by diagnostics, never by the learner


def index_hash(i: int) -> int:
    """64-bit hash of a seed index: the first 8 bytes of blake2b(str(i)), little endian."""
    digest = hashlib.blake2b(str(int(i)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master: int, i: int) -> int:
    """Per-run seed ``master XOR index_hash(i)``."""
    return (int(master) & MASK64) ^ index_hash(i)


def run_seeds(master: int, count: int) -> list[int]:
    return [derive_seed(master, i) for i in range(count)]


def bit_generator(seed: int, stream: int) -> np.random.Philox:
    """Philox bit generator for substream ``stream`` of run ``seed``."""
    if seed < 0 or seed > MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Philox(np.random.SeedSequence([int(seed), int(stream)]))


def generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(bit_generator(seed, stream))
