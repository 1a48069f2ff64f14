"""Deterministic RNG streams and exact integer draws.

All randomness in the package flows through numpy Generators created here.
Replica streams are derived from a master 64-bit seed with a counter-based
split, so runs are reproducible and replicas are independent.
"""

from __future__ import annotations

import numpy as np


def master_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Stream for replica `replica` of a run seeded with `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica,)))


def randrange_big(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in [0, n) for arbitrary-precision n.

    Rejection sampling on n.bit_length() bits; exact, no floating point.
    """
    if n <= 0:
        raise ValueError("randrange_big needs n >= 1")
    bits = n.bit_length()
    words = (bits + 31) // 32
    excess = 32 * words - bits
    while True:
        raw = rng.integers(0, 1 << 32, size=words, dtype=np.uint64)
        x = 0
        for w in raw:
            x = (x << 32) | int(w)
        x >>= excess
        if x < n:
            return x


def weighted_index_big(rng: np.random.Generator, weights: list[int]) -> int:
    """Index i with probability weights[i]/sum(weights), exact over big ints."""
    total = sum(weights)
    if total <= 0:
        raise ValueError("weights must have positive sum")
    u = randrange_big(rng, total)
    acc = 0
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i
    raise AssertionError("unreachable")
