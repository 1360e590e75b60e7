"""Backend selection for the simulation kernels.

The compiled Cython core is used when it importable (and the call fits
its packed-key limits); otherwise the pure-numpy backend takes over.
Both produce byte-identical trajectories for the same (distribution,
seed, replica) because they consume the same Philox stream under the
same sampling contract.  Set ``LTWALK_BACKEND=pure`` to force the
fallback (used by the benchmark and the equivalence tests).
"""

from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np

from . import _kernel_py
from .rng import replica_key

try:
    from . import _kernel as _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None

_PACK_LIMIT = 1 << 20

_FORCED = os.environ.get("LTWALK_BACKEND", "").strip().lower()
if _FORCED == "pure":
    _active = None
elif _FORCED == "compiled" and _compiled is None:  # pragma: no cover
    raise ImportError("LTWALK_BACKEND=compiled but ltwalk._kernel is not built")
else:
    _active = _compiled

BACKEND = "compiled" if _active is not None else "pure"


def available_backends() -> tuple[str, ...]:
    return ("compiled", "pure") if _compiled is not None else ("pure",)


class CheckpointSnapshot(NamedTuple):
    """Histogram snapshot of one replica at one checkpoint."""

    n: int
    range: int
    l_max: int
    js: np.ndarray  # multiplicities with at least one site
    qs: np.ndarray  # number of sites visited exactly js[i] times


def _tables_arrays(tables):
    cum = np.ascontiguousarray(tables.cum, dtype=np.float64)
    thresh = np.ascontiguousarray(tables.thresh, dtype=np.uint64)
    alias = np.ascontiguousarray(tables.alias, dtype=np.int64)
    return tables.mode, cum, thresh, alias


def _fits_compiled(dist, n_max: int) -> bool:
    return dist.dim <= 3 and n_max * max(dist.max_radius, 1) < _PACK_LIMIT


def simulate_local_times(dist, tables, seed: int, replica: int,
                         checkpoints, backend: str | None = None):
    """Run one replica to the last checkpoint, snapshotting histograms.

    ``checkpoints`` must be a strictly increasing sequence of ints >= 1.
    """
    ck = np.asarray(checkpoints, dtype=np.int64)
    if ck.ndim != 1 or ck.size == 0 or ck[0] < 1 or np.any(np.diff(ck) <= 0):
        raise ValueError("checkpoints must be strictly increasing and >= 1")
    mode, cum, thresh, alias = _tables_arrays(tables)
    k0, k1 = replica_key(seed, replica)
    deltas = dist.deltas
    impl = _resolve(backend)
    if impl is _compiled and not _fits_compiled(dist, int(ck[-1])):
        impl = _kernel_py
    raw = impl.simulate_local_times(deltas, mode, cum, thresh, alias,
                                    k0, k1, ck)
    return [CheckpointSnapshot(n, r, lm, np.asarray(js), np.asarray(qs))
            for n, r, lm, js, qs in raw]


def first_return_time(dist, tables, seed: int, replica: int, horizon: int,
                      backend: str | None = None) -> int:
    """First time the replica's walk revisits the origin (0 if never)."""
    mode, cum, thresh, alias = _tables_arrays(tables)
    k0, k1 = replica_key(seed, replica)
    impl = _resolve(backend)
    if impl is _compiled and not _fits_compiled(dist, int(horizon)):
        impl = _kernel_py
    return int(impl.first_return_time(dist.deltas, mode, cum, thresh, alias,
                                      k0, k1, int(horizon)))


def philox_raw(k0: int, k1: int, n: int, backend: str | None = None):
    impl = _resolve(backend)
    return impl.philox_raw(k0, k1, n)


def _resolve(backend: str | None):
    if backend is None:
        return _active if _active is not None else _kernel_py
    if backend == "pure":
        return _kernel_py
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available")
        return _compiled
    raise ValueError(f"unknown backend {backend!r}")
