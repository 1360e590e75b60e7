"""Step distributions on Z^d and seeded, reproducible walk generators."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import _kernel_py, rng
from .errors import (
    DimensionMismatch,
    EmptySupport,
    MassNotOne,
    NegativeProbability,
    ParameterOutOfRange,
    UnknownPreset,
)

Site = tuple[int, ...]

#: support size above which the alias table replaces the cumulative scan
ALIAS_THRESHOLD = 8

_MASS_TOL = 1e-9


@dataclass(eq=False)
class StepDistribution:
    """Finite-support probability law of one increment on Z^d.

    ``probs`` is normalized to sum to exactly 1.0 in float arithmetic;
    ``exact_probs`` carries the rational law when every input weight was
    rational (used by the exact-analysis module only).
    """

    dim: int
    sites: tuple[Site, ...]
    probs: np.ndarray
    exact_probs: tuple[Fraction, ...] | None = None
    name: str = "custom"

    @property
    def support_size(self) -> int:
        return len(self.sites)

    @property
    def max_radius(self) -> int:
        """Maximum infinity-norm over the support."""
        return max(max(abs(c) for c in s) for s in self.sites)

    @property
    def deltas(self) -> np.ndarray:
        """(K, d) int64 increment matrix, row order matching ``probs``."""
        return np.ascontiguousarray(np.array(self.sites, dtype=np.int64).reshape(len(self.sites), self.dim))

    def fingerprint(self) -> tuple:
        return (self.dim, self.sites, tuple(float(p) for p in self.probs))

    def mean_drift(self) -> np.ndarray:
        return self.probs @ np.array(self.sites, dtype=np.float64).reshape(len(self.sites), self.dim)

    def lattice_rank(self) -> int:
        """Rank of the linear span of the support vectors."""
        m = np.array(self.sites, dtype=np.float64).reshape(len(self.sites), self.dim)
        m = m[np.any(m != 0, axis=1)]
        if m.size == 0:
            return 0
        return int(np.linalg.matrix_rank(m))


def validate_distribution(atoms: Sequence[tuple[Sequence[int], object]],
                          d: int) -> StepDistribution:
    """Validate and canonicalize raw (site, probability) atoms.

    Duplicate sites are merged by summing probability; sites are sorted
    lexicographically so that a given law always maps uniforms to steps
    the same way.
    """
    if d < 1:
        raise DimensionMismatch(f"dimension must be >= 1, got {d}")
    if not atoms:
        raise EmptySupport("step distribution needs at least one atom")
    exact = True
    merged: dict[Site, Fraction | float] = {}
    for site, prob in atoms:
        site = tuple(int(c) for c in site)
        if len(site) != d:
            raise DimensionMismatch(f"site {site} has dimension {len(site)}, expected {d}")
        if isinstance(prob, (Fraction, int)):
            prob = Fraction(prob)
        else:
            prob = float(prob)
            exact = False
        if prob <= 0:
            raise NegativeProbability(f"atom {site} has non-positive probability {prob}")
        merged[site] = merged.get(site, Fraction(0) if exact else 0.0) + prob
    if exact:
        total = sum(merged.values())
        if total != 1:
            raise MassNotOne(f"probabilities sum to {total}, expected 1")
    else:
        merged = {s: float(p) for s, p in merged.items()}
        total = float(sum(merged.values()))
        if abs(total - 1.0) > _MASS_TOL:
            raise MassNotOne(f"probabilities sum to {total}, expected 1 within {_MASS_TOL}")
    sites = tuple(sorted(merged))
    probs = np.array([float(merged[s]) for s in sites], dtype=np.float64)
    probs /= probs.sum()
    return StepDistribution(
        dim=d,
        sites=sites,
        probs=probs,
        exact_probs=tuple(merged[s] for s in sites) if exact else None,
    )


def preset(name: str, *, d: int | None = None, p=None,
           atoms=None) -> StepDistribution:
    """Named step laws: ``simple`` (d-dim SRW), ``biased1d``, ``custom``."""
    if name == "simple":
        if d is None or int(d) != d or d < 1:
            raise ParameterOutOfRange(f"simple walk needs integer dimension >= 1, got {d}")
        d = int(d)
        w = Fraction(1, 2 * d)
        atoms = []
        for i in range(d):
            e = [0] * d
            e[i] = 1
            atoms.append((tuple(e), w))
            e = [0] * d
            e[i] = -1
            atoms.append((tuple(e), w))
        dist = validate_distribution(atoms, d)
        dist.name = f"simple({d})"
        return dist
    if name == "biased1d":
        if p is None:
            raise ParameterOutOfRange("biased1d needs p")
        pf = Fraction(p) if isinstance(p, (Fraction, int)) else p
        if not 0 < pf < 1:
            raise ParameterOutOfRange(f"biased1d needs p in (0,1), got {p}")
        q = (Fraction(1) - pf) if isinstance(pf, Fraction) else 1.0 - pf
        dist = validate_distribution([((1,), pf), ((-1,), q)], 1)
        dist.name = f"biased1d({p})"
        return dist
    if name == "custom":
        if atoms is None or d is None:
            raise ParameterOutOfRange("custom preset needs atoms and d")
        return validate_distribution(atoms, d)
    raise UnknownPreset(f"unknown preset {name!r}")


@dataclass(eq=False)
class SamplerTables:
    """Prebuilt sampling tables shared by both kernel backends."""

    mode: int  # 0 = cumulative scan, 1 = alias
    cum: np.ndarray
    thresh: np.ndarray
    alias: np.ndarray


def build_tables(dist: StepDistribution) -> SamplerTables:
    k = dist.support_size
    if k <= ALIAS_THRESHOLD:
        cum = np.cumsum(dist.probs)
        cum[-1] = 1.0
        return SamplerTables(0, cum, np.empty(0, np.uint64), np.empty(0, np.int64))
    # Vose alias construction, deterministic processing order
    scaled = [float(p) * k for p in dist.probs]
    small = deque(i for i in range(k) if scaled[i] < 1.0)
    large = deque(i for i in range(k) if scaled[i] >= 1.0)
    accept = [1.0] * k
    alias = list(range(k))
    while small and large:
        s = small.popleft()
        g = large.popleft()
        accept[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    thresh = np.array(
        [min(round(a * 2.0**64), 2**64 - 1) for a in accept], dtype=np.uint64
    )
    return SamplerTables(1, np.empty(0, np.float64), thresh,
                         np.array(alias, dtype=np.int64))


@dataclass(eq=False)
class WalkGenerator:
    """Seeded increment-stream source for one replica.

    Identical (dist, seed, replica_index) triples produce byte-identical
    streams; distinct replica indices get disjoint Philox keys.
    """

    dist: StepDistribution
    seed: int
    replica_index: int = 0

    def key(self) -> tuple[int, int]:
        return rng.replica_key(self.seed, self.replica_index)

    def steps_block(self, n: int) -> np.ndarray:
        """First ``n`` increments as an (n, d) int64 array."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return np.empty((0, self.dist.dim), dtype=np.int64)
        tables = build_tables(self.dist)
        k0, k1 = self.key()
        per = 1 if tables.mode == 0 else 2
        raw = rng.philox_raw(k0, k1, per * n)
        idx = _kernel_py.sample_indices(tables.mode, tables.cum, tables.thresh,
                                        tables.alias, raw)
        return self.dist.deltas[idx]

    def iter_steps(self, n: int) -> Iterator[Site]:
        for row in self.steps_block(n):
            yield tuple(int(c) for c in row)
