"""Replicated simulation runs and statistical verification of the
law-of-large-numbers limits, variance bounds and maximal-local-time
bounds.

Replicas are independent (each owns its generator and state) and may
run in parallel; aggregation reduces per-replica values with exact
summation (math.fsum), so report values do not depend on completion
order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Sequence

import numpy as np
from scipy.stats import chi2

from . import exact, kernel
from .errors import (
    DeltaOutOfRange,
    NotMonotone,
    ParameterOutOfRange,
    RecurrentWalkRefused,
)
from .local_times import ObservableF
from .walks import StepDistribution, build_tables


# ---------------------------------------------------------------------------
# configuration and the replica engine
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One experiment: law, observables, replication and schedule."""

    dist: StepDistribution
    observables: tuple[ObservableF, ...] = ()
    alphas: tuple[float, ...] = ()
    replicas: int = 1
    n_max: int = 1
    checkpoint_start: int = 1
    checkpoint_ratio: float = 2.0
    checkpoints: tuple[int, ...] | None = None
    seed: int = 0
    gamma: float | None = None  # pinned escape probability
    exact_horizon: int = 0
    threads: int = 1
    override_transience_check: bool = False
    verify: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicas < 1:
            raise ParameterOutOfRange("replicas must be >= 1")
        if self.checkpoint_ratio <= 1.0:
            raise ParameterOutOfRange("checkpoint ratio must be > 1")
        if self.n_max < self.checkpoint_start:
            raise ParameterOutOfRange("n_max must reach the first checkpoint")


def checkpoint_schedule(cfg: ExperimentConfig) -> list[int]:
    """Geometric schedule (ratio rho from the first checkpoint), or the
    explicit list when one is configured."""
    if cfg.checkpoints:
        cks = sorted(set(int(c) for c in cfg.checkpoints))
        if cks[0] < 1 or cks[-1] > cfg.n_max:
            raise ParameterOutOfRange("explicit checkpoints outside [1, n_max]")
        return cks
    cks = []
    value = float(cfg.checkpoint_start)
    while round(value) <= cfg.n_max:
        cks.append(int(round(value)))
        value *= cfg.checkpoint_ratio
    return sorted(set(cks))


@dataclass
class SimBatch:
    """Histogram snapshots for every (replica, checkpoint) pair."""

    checkpoints: list[int]
    snapshots: list[list[kernel.CheckpointSnapshot]]

    @property
    def replicas(self) -> int:
        return len(self.snapshots)

    def ranges(self) -> np.ndarray:
        return np.array([[s.range for s in row] for row in self.snapshots],
                        dtype=np.int64)

    def l_max(self) -> np.ndarray:
        return np.array([[s.l_max for s in row] for row in self.snapshots],
                        dtype=np.int64)

    def functional(self, f: ObservableF) -> np.ndarray:
        """G_n(f) per replica and checkpoint, replayed from histograms."""
        out = np.empty((self.replicas, len(self.checkpoints)))
        for i, row in enumerate(self.snapshots):
            for j, snap in enumerate(row):
                out[i, j] = float(np.dot(f.values(snap.js), snap.qs))
        return out

    def functional_alpha(self, alpha: float) -> np.ndarray:
        return self.functional(ObservableF.power(alpha))


def run_replicas(cfg: ExperimentConfig,
                 checkpoints: Sequence[int] | None = None) -> SimBatch:
    cks = list(checkpoints) if checkpoints is not None else checkpoint_schedule(cfg)
    tables = build_tables(cfg.dist)

    def one(r: int):
        return kernel.simulate_local_times(cfg.dist, tables, cfg.seed, r, cks)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            snaps = list(pool.map(one, range(cfg.replicas)))
    else:
        snaps = [one(r) for r in range(cfg.replicas)]
    return SimBatch(checkpoints=cks, snapshots=snaps)


def _fmean(xs) -> float:
    return math.fsum(xs) / len(xs)


def _fvar(xs, ddof: int = 1) -> float:
    if len(xs) <= ddof:
        return 0.0
    m = _fmean(xs)
    return math.fsum((float(x) - m) ** 2 for x in xs) / (len(xs) - ddof)


# ---------------------------------------------------------------------------
# transience gate and gamma estimation
# ---------------------------------------------------------------------------

def _gamma_gate(cfg: ExperimentConfig) -> tuple[float, exact.ReturnSeries]:
    horizon = max(cfg.exact_horizon, 512)
    series = exact.return_series(cfg.dist, horizon)
    s = series.summary
    if (s.recurrent or s.trivial_transient) and not cfg.override_transience_check:
        kind = "recurrent" if s.recurrent else "trivially transient (gamma = 1)"
        raise RecurrentWalkRefused(
            f"walk looks {kind}; set override_transience_check to run anyway")
    gamma = cfg.gamma if cfg.gamma is not None else s.gamma_estimate
    return gamma, series


@dataclass
class GammaEstimate:
    """Monte Carlo escape-probability estimate with a Wilson 95% CI.

    The estimator targets the finite-horizon gamma_n, which upper-bounds
    gamma; the bias gamma_n - gamma vanishes as the horizon grows.
    """

    gamma_hat: float
    ci_low: float
    ci_high: float
    replicas: int
    horizon: int


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def estimate_gamma_mc(cfg: ExperimentConfig, horizon: int) -> GammaEstimate:
    if cfg.replicas < 100:
        raise ParameterOutOfRange("gamma estimation needs at least 100 replicas")
    tables = build_tables(cfg.dist)

    def one(r: int) -> int:
        return kernel.first_return_time(cfg.dist, tables, cfg.seed, r, horizon)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            times = list(pool.map(one, range(cfg.replicas)))
    else:
        times = [one(r) for r in range(cfg.replicas)]
    no_return = sum(1 for t in times if t == 0)
    lo, hi = wilson_interval(no_return, cfg.replicas)
    return GammaEstimate(gamma_hat=no_return / cfg.replicas, ci_low=lo,
                         ci_high=hi, replicas=cfg.replicas, horizon=horizon)


# ---------------------------------------------------------------------------
# strong-law verification
# ---------------------------------------------------------------------------

@dataclass
class SllnRow:
    n: int
    observable: str
    mean: float          # replica mean of G_n(f)/n
    variance: float      # replica variance of G_n(f)/n
    exact_mean: float    # exact E G_n(f)/n, nan beyond the exact horizon
    limit: float
    standardized: float  # (mean - limit) / (replica std error)
    l2_distance: float   # sqrt of mean squared deviation from the limit


@dataclass
class ConvergenceReport:
    gamma: float
    rows: list[SllnRow]
    checkpoints: list[int]

    def by_observable(self, label: str) -> list[SllnRow]:
        return [r for r in self.rows if r.observable == label]


def run_slln(cfg: ExperimentConfig,
             checkpoints: Sequence[int] | None = None,
             batch: SimBatch | None = None) -> ConvergenceReport:
    """Replicated check of G_n(f)/n against the explicit limit constant."""
    gamma, series = _gamma_gate(cfg)
    if batch is None:
        batch = run_replicas(cfg, checkpoints)
    table = None
    if cfg.exact_horizon > 0:
        table = exact.get_eq_table(cfg.dist, min(cfg.exact_horizon, batch.checkpoints[-1]))
    rows = []
    for f in cfg.observables:
        limit = exact.limit_constant(f, gamma)
        g = batch.functional(f)
        for j, n in enumerate(batch.checkpoints):
            over_n = g[:, j] / n
            mean = _fmean(over_n)
            var = _fvar(over_n)
            se = math.sqrt(var / batch.replicas) if var > 0 else 0.0
            if se > 0:
                standardized = (mean - limit) / se
            elif mean == limit:
                standardized = 0.0
            else:
                standardized = math.copysign(math.inf, mean - limit)
            exact_mean = math.nan
            if table is not None and n <= table.n_horizon:
                exact_mean = table.expected_G(f, n) / n
            rows.append(SllnRow(
                n=n, observable=f.label, mean=mean, variance=var,
                exact_mean=exact_mean, limit=limit, standardized=standardized,
                l2_distance=math.sqrt(_fmean([(x - limit) ** 2 for x in over_n])),
            ))
    return ConvergenceReport(gamma=gamma, rows=rows, checkpoints=batch.checkpoints)


# ---------------------------------------------------------------------------
# variance-bound verification
# ---------------------------------------------------------------------------

def verify_variance(cfg: ExperimentConfig, f: ObservableF,
                    checkpoints: Sequence[int] | None = None,
                    batch: SimBatch | None = None) -> exact.BoundCertificate:
    """Empirical Var G_n(f) (chi-square 99% CI) against the exact bound.

    Holds when the bound dominates the lower confidence limit at every
    checkpoint; the trend of Var(G_n/n) is reported alongside.
    """
    if cfg.replicas < 50:
        raise ParameterOutOfRange("variance verification needs at least 50 replicas")
    if not f.is_nondecreasing():
        raise NotMonotone(f"{f.label} is not non-decreasing")
    gamma, series = _gamma_gate(cfg)
    if batch is None:
        batch = run_replicas(cfg, checkpoints)
    n_top = batch.checkpoints[-1]
    if series.n_horizon < n_top:
        series = exact.return_series(cfg.dist, n_top)
    table = exact.get_eq_table(cfg.dist, n_top)
    g = batch.functional(f)
    r = batch.replicas
    rows = []
    ok = True
    prev_scaled = None
    trend_down = True
    for j, n in enumerate(batch.checkpoints):
        s2 = _fvar(g[:, j])
        ci_low = (r - 1) * s2 / float(chi2.ppf(0.995, r - 1))
        ci_high = (r - 1) * s2 / float(chi2.ppf(0.005, r - 1))
        bound = exact.variance_bound(f, n, series.u, gamma, table=table)
        ok = ok and (bound >= ci_low)
        scaled = s2 / (n * n)
        if prev_scaled is not None and scaled > prev_scaled:
            trend_down = False
        prev_scaled = scaled
        rows.append({"n": n, "var": s2, "ci_low": ci_low, "ci_high": ci_high,
                     "bound": bound, "var_over_n2": scaled})
    return exact.BoundCertificate(
        name="variance",
        params={"observable": f.label, "replicas": r, "gamma": gamma,
                "confidence": 0.99, "var_over_n2_decreasing": trend_down},
        evidence=rows,
        verdict="Holds" if ok else "Fails",
    )


# ---------------------------------------------------------------------------
# maximal local time
# ---------------------------------------------------------------------------

@dataclass
class MaxLocalCheckpoint:
    n: int
    counts: dict[int, int]            # empirical distribution of l(n)
    tail_rows: list[dict]
    proposition_bound: float
    violation_fraction: float
    l_over_log_mean: float
    l_over_log_max: float


@dataclass
class MaxLocalReport:
    gamma: float
    eps: float
    m: int
    inv_lambda_star: float
    checkpoints: list[MaxLocalCheckpoint]

    @property
    def all_tail_ok(self) -> bool:
        return all(row["ok"] for ck in self.checkpoints for row in ck.tail_rows)


def default_t_grid(n: int, gamma: float) -> list[int]:
    lam = exact.lambda_star(gamma)
    base = {1, 2, 3, 5, 8}
    base.update(max(1, round(k * math.log(n) / lam)) for k in (0.5, 1.0, 1.5, 2.0))
    return sorted(base)


def run_maxlocal(cfg: ExperimentConfig, eps: float = 0.5, m: int = 1,
                 t_grid: Sequence[int] | None = None,
                 checkpoints: Sequence[int] | None = None,
                 batch: SimBatch | None = None) -> MaxLocalReport:
    """Empirical maximal-local-time exceedance against the geometric tail
    bound and the iterated-logarithm envelope."""
    gamma, _ = _gamma_gate(cfg)
    if batch is None:
        batch = run_replicas(cfg, checkpoints)
    lmax = batch.l_max()
    r = batch.replicas
    out = []
    for j, n in enumerate(batch.checkpoints):
        col = lmax[:, j]
        grid = list(t_grid) if t_grid is not None else default_t_grid(n, gamma)
        t_rows = []
        for t in grid:
            emp = float(np.mean(col > t))
            bound = exact.maxlocal_tail_bound(n, int(t), gamma)
            se = math.sqrt(emp * (1 - emp) / r)
            t_rows.append({"t": int(t), "empirical": emp, "bound": bound,
                           "se": se, "ok": emp <= bound + 3 * se})
        prop = exact.maxlocal_proposition_bound(n, eps, m, gamma)
        viol = float(np.mean(col > prop))
        logn = math.log(n)
        vals, cnts = np.unique(col, return_counts=True)
        out.append(MaxLocalCheckpoint(
            n=n, counts=dict(zip(vals.tolist(), cnts.tolist())),
            tail_rows=t_rows, proposition_bound=prop, violation_fraction=viol,
            l_over_log_mean=float(col.mean()) / logn,
            l_over_log_max=float(col.max()) / logn,
        ))
    return MaxLocalReport(gamma=gamma, eps=eps, m=m,
                          inv_lambda_star=1.0 / exact.lambda_star(gamma),
                          checkpoints=out)


# ---------------------------------------------------------------------------
# truncated-functional decomposition
# ---------------------------------------------------------------------------

@dataclass
class TruncationRow:
    replica: int
    n: int
    low: float    # G_n of f restricted to counts <= cut1
    mid: float    # counts in (cut1, cut2]
    rest: float   # counts beyond cut2
    total: float  # low + mid + rest
    l_max: int


@dataclass
class TruncationReport:
    case: str
    thresholds: dict[int, tuple[float, float | None]]
    rows: list[TruncationRow]

    def remainder_frequency(self, n: int) -> float:
        rows = [r for r in self.rows if r.n == n]
        return sum(1 for r in rows if r.rest != 0.0) / len(rows)


def run_truncation_split(cfg: ExperimentConfig, f: ObservableF, case: str,
                         eta: float | None = None,
                         checkpoints: Sequence[int] | None = None,
                         batch: SimBatch | None = None) -> TruncationReport:
    """Per-replica decomposition of G_n(f) into the truncation components.

    Case ii uses both cut levels; case i has no upper cut, so the middle
    component is identically zero and the remainder collects everything
    above cut1.
    """
    gamma, _ = _gamma_gate(cfg)
    if batch is None:
        batch = run_replicas(cfg, checkpoints)
    thresholds = {}
    for n in batch.checkpoints:
        thresholds[n] = exact.truncation_thresholds(n, gamma, case, eta=eta)
    rows = []
    for i, rep in enumerate(batch.snapshots):
        for j, snap in enumerate(rep):
            n = batch.checkpoints[j]
            cut1, cut2 = thresholds[n]
            fv = f.values(snap.js)
            terms = fv * snap.qs
            low = float(terms[snap.js <= cut1].sum())
            if cut2 is None:
                mid = 0.0
                rest = float(terms[snap.js > cut1].sum())
            else:
                mid = float(terms[(snap.js > cut1) & (snap.js <= cut2)].sum())
                rest = float(terms[snap.js > cut2].sum())
            rows.append(TruncationRow(replica=i, n=n, low=low, mid=mid,
                                      rest=rest, total=low + mid + rest,
                                      l_max=snap.l_max))
    return TruncationReport(case=case, thresholds=thresholds, rows=rows)


# ---------------------------------------------------------------------------
# subsequence construction (block argmin)
# ---------------------------------------------------------------------------

@dataclass
class SubsequencePlan:
    delta: float
    b: float
    k0: int                      # first block exponent: blocks span (b^{K+r-2}, b^{K+r-1}]
    n_r: list[int]
    v_r: list[float]
    partial_sums: list[float]
    ratios_ok: bool
    log_b: float


def _floor_b_pow(one_plus_delta: Fraction, m: int) -> int:
    """floor(b^m) for b = sqrt(1+delta), computed exactly."""
    if m % 2 == 0:
        q = one_plus_delta ** (m // 2)
        return q.numerator // q.denominator
    full = one_plus_delta ** m  # b^m = sqrt(full); floor via integer sqrt
    return isqrt(full.numerator * full.denominator) // full.denominator


def build_subsequence(v, delta, blocks: int = 50, *,
                      strictly_decreasing: bool = False,
                      scan_cap: int = 1 << 22) -> SubsequencePlan:
    """Pick n_r minimizing v over geometric blocks (b = sqrt(1+delta)).

    Block boundaries are computed in exact integer arithmetic, so the
    emitted subsequence satisfies sqrt(1+delta) n_{r-1} <= n_{r+1} <=
    (1+delta) n_r exactly.  Ties go to the smallest index;
    ``strictly_decreasing`` lets a callable v skip the scan (the block
    minimum is then the right endpoint).
    """
    one_plus = Fraction(delta) + 1
    if not 1 < one_plus < 4:
        raise DeltaOutOfRange(f"need delta in (0,3) so that b is in (1,2), got {delta}")
    b = math.sqrt(float(one_plus))
    if isinstance(v, (list, tuple, np.ndarray)):
        arr = np.asarray(v, dtype=np.float64)
        v_at = lambda n: float(arr[n])
        v_limit = len(arr) - 1
    else:
        v_at = lambda n: float(v(n))
        v_limit = None

    k0 = 1
    while _floor_b_pow(one_plus, k0) - _floor_b_pow(one_plus, k0 - 1) < 2:
        k0 += 1

    n_r: list[int] = []
    v_r: list[float] = []
    for r in range(1, blocks + 1):
        lo = _floor_b_pow(one_plus, k0 + r - 2) + 1
        hi = _floor_b_pow(one_plus, k0 + r - 1)
        if v_limit is not None and hi > v_limit:
            break
        if strictly_decreasing and v_limit is None:
            pick = hi
        else:
            if hi - lo + 1 > scan_cap:
                raise ParameterOutOfRange(
                    f"block ({lo}, {hi}) too large to scan; pass an array or "
                    "strictly_decreasing=True")
            pick, best = lo, v_at(lo)
            for n in range(lo + 1, hi + 1):
                val = v_at(n)
                if val < best:
                    pick, best = n, val
        n_r.append(pick)
        v_r.append(v_at(pick))
        if v_r[-1] < 0:
            raise ParameterOutOfRange("v must be non-negative")

    partial = list(itertools.accumulate(v_r))
    ratios_ok = _check_ratios(n_r, one_plus)
    return SubsequencePlan(delta=float(delta), b=b, k0=k0, n_r=n_r, v_r=v_r,
                           partial_sums=partial, ratios_ok=ratios_ok,
                           log_b=math.log(b))


def _check_ratios(n_r: list[int], one_plus: Fraction) -> bool:
    """sqrt(1+delta) n_{r-1} <= n_{r+1} <= (1+delta) n_r, exactly."""
    for i in range(1, len(n_r) - 1):
        prev_sq = Fraction(n_r[i - 1]) ** 2 * one_plus
        if Fraction(n_r[i + 1]) ** 2 < prev_sq:
            return False
        if Fraction(n_r[i + 1]) > Fraction(n_r[i]) * one_plus:
            return False
    return True


# ---------------------------------------------------------------------------
# exhaustive (path-enumeration) mode for small n
# ---------------------------------------------------------------------------

def _require_exhaustible(dist: StepDistribution, n: int):
    if dist.exact_probs is None:
        raise ParameterOutOfRange("exhaustive mode needs rational probabilities")
    if dist.support_size ** n > 1 << 21:
        raise ParameterOutOfRange(f"too many paths: {dist.support_size}**{n}")


def exhaustive_eq(dist: StepDistribution, n: int) -> dict[int, Fraction]:
    """E Q_n(j) for all j by weighted enumeration of every length-n path."""
    _require_exhaustible(dist, n)
    deltas = [tuple(s) for s in dist.sites]
    probs = dist.exact_probs
    acc: dict[int, Fraction] = {}
    for path in itertools.product(range(dist.support_size), repeat=n):
        w = Fraction(1)
        for i in path:
            w *= probs[i]
        for j, q in _path_histogram(deltas, path).items():
            acc[j] = acc.get(j, Fraction(0)) + w * q
    return acc


def exhaustive_moments(dist: StepDistribution, n: int,
                       f: ObservableF) -> tuple[Fraction, Fraction]:
    """Exact (mean, variance) of G_n(f) by full path enumeration."""
    _require_exhaustible(dist, n)
    deltas = [tuple(s) for s in dist.sites]
    probs = dist.exact_probs
    m1 = Fraction(0)
    m2 = Fraction(0)
    for path in itertools.product(range(dist.support_size), repeat=n):
        w = Fraction(1)
        for i in path:
            w *= probs[i]
        g = Fraction(0)
        for j, q in _path_histogram(deltas, path).items():
            g += Fraction(f.value(j)) * q
        m1 += w * g
        m2 += w * g * g
    return m1, m2 - m1 * m1


def _path_histogram(deltas, path) -> dict[int, int]:
    d = len(deltas[0])
    pos = (0,) * d
    counts: dict[tuple, int] = {pos: 1}
    for i in path:
        pos = tuple(a + b for a, b in zip(pos, deltas[i]))
        counts[pos] = counts.get(pos, 0) + 1
    hist: dict[int, int] = {}
    for c in counts.values():
        hist[c] = hist.get(c, 0) + 1
    return hist
