"""Pure-numpy simulation backend.

Implements the same stream/consumption contract as the compiled kernel
so that both backends produce byte-identical trajectories:

* one raw uint64 per step in cdf mode, two in alias mode;
* cdf mode: ``u = (raw >> 11) * 2**-53``, step index is the first ``i``
  with ``u < cum[i]`` (clipped to the last atom);
* alias mode: ``j = raw0 % K``, accept ``j`` when ``raw1 < thresh[j]``
  else take ``alias[j]``.

Sites are packed into a single int64 (21 bits per signed coordinate)
whenever ``d <= 3`` and the trajectory stays inside ``[-2**20, 2**20)``;
otherwise rows are deduplicated directly, which keeps this backend
usable for any dimension or horizon.
"""

from __future__ import annotations

import numpy as np

from .rng import philox_raw

_U53 = 2.0 ** -53
_PACK_OFFSET = 1 << 20
_PACK_BITS = 21


def sample_indices(mode, cum, thresh, alias, raw):
    """Map a raw uint64 block to step indices (vectorized)."""
    if mode == 0:
        u = (raw >> np.uint64(11)).astype(np.float64) * _U53
        idx = np.searchsorted(cum, u, side="right")
        return np.minimum(idx, len(cum) - 1).astype(np.int64)
    k = np.uint64(len(thresh))
    j = (raw[0::2] % k).astype(np.int64)
    take = raw[1::2] < thresh[j]
    return np.where(take, j, alias[j])


def _positions(deltas, mode, cum, thresh, alias, k0, k1, n):
    per = 1 if mode == 0 else 2
    raw = philox_raw(k0, k1, per * n)
    idx = sample_indices(mode, cum, thresh, alias, raw)
    steps = deltas[idx]
    d = deltas.shape[1]
    full = np.empty((n + 1, d), dtype=np.int64)
    full[0] = 0
    np.cumsum(steps, axis=0, out=full[1:])
    return full


def _packable(full):
    d = full.shape[1]
    return d <= 3 and int(np.abs(full).max(initial=0)) < _PACK_OFFSET


def _pack(full):
    keys = full[:, 0] + _PACK_OFFSET
    for c in range(1, full.shape[1]):
        keys = keys + ((full[:, c] + _PACK_OFFSET) << (_PACK_BITS * c))
    return keys


def simulate_local_times(deltas, mode, cum, thresh, alias, k0, k1, checkpoints):
    """Simulate one replica and snapshot local-time histograms.

    Returns a list (one entry per checkpoint) of tuples
    ``(n, range, l_max, js, qs)`` where ``qs[i]`` sites have been
    visited exactly ``js[i]`` times among ``S_0 .. S_n``.
    """
    n_max = int(checkpoints[-1])
    full = _positions(deltas, mode, cum, thresh, alias, k0, k1, n_max)
    packed = _pack(full) if _packable(full) else None
    out = []
    for n in checkpoints:
        n = int(n)
        if packed is not None:
            counts = np.unique(packed[: n + 1], return_counts=True)[1]
        else:
            counts = np.unique(full[: n + 1], axis=0, return_counts=True)[1]
        q = np.bincount(counts)
        js = np.flatnonzero(q)
        out.append((n, len(counts), int(counts.max()), js.astype(np.int64), q[js]))
    return out


def first_return_time(deltas, mode, cum, thresh, alias, k0, k1, horizon):
    """Index of the first return to the origin, or 0 if none by ``horizon``."""
    full = _positions(deltas, mode, cum, thresh, alias, k0, k1, int(horizon))
    at_origin = np.flatnonzero((full[1:] == 0).all(axis=1))
    return int(at_origin[0]) + 1 if at_origin.size else 0


# re-exported so kernel.py offers the same surface for both backends
__all__ = ["philox_raw", "sample_indices", "simulate_local_times", "first_return_time"]
