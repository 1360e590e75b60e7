"""Deterministic stream derivation for replicated simulation runs.

All randomness in the package flows from a single 64-bit master seed.
Each replica gets its own Philox4x64-10 counter-based generator whose
128-bit key is derived by running the SplitMix64 finalizer over
``seed + word_index * golden``; replicas therefore own provably
non-overlapping streams (distinct Philox keys give independent
sequences, period 2**256 - 1 per key).

Both simulation backends consume the *same* raw uint64 stream: the
pure-numpy backend draws it from ``numpy.random.Philox.random_raw`` and
the compiled backend re-implements Philox4x64-10 bit-exactly, so a
(seed, replica) pair yields byte-identical trajectories regardless of
which backend is active.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer: avalanching 64-bit mix of ``x``."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def replica_key(seed: int, replica_index: int) -> tuple[int, int]:
    """128-bit Philox key for one replica, as (low word, high word).

    Words ``2r`` and ``2r+1`` of the SplitMix64 stream seeded at
    ``seed`` are assigned to replica ``r``, so distinct replicas never
    share key material.
    """
    if replica_index < 0:
        raise ValueError("replica_index must be >= 0")
    seed &= _MASK64
    k0 = splitmix64((seed + 2 * replica_index * _GOLDEN) & _MASK64)
    k1 = splitmix64((seed + (2 * replica_index + 1) * _GOLDEN) & _MASK64)
    return k0, k1


def philox_bitgen(k0: int, k1: int) -> np.random.Philox:
    """numpy Philox bit generator for the given 128-bit key."""
    return np.random.Philox(key=(k1 << 64) | k0)


def philox_raw(k0: int, k1: int, n: int) -> np.ndarray:
    """First ``n`` raw uint64 outputs of the keyed Philox stream."""
    return philox_bitgen(k0, k1).random_raw(n).astype(np.uint64)
