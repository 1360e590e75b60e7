"""Exact (deterministic) analysis of return probabilities, first-return
laws, escape probability, visit-count moments, limit constants and the
variance / maximal-local-time bounds.

Everything here is a pure function of its inputs; the convolution-table
cache is the only shared state (single writer behind a lock).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .errors import (
    DimensionUnsupported,
    GammaOutOfRange,
    HorizonExceeded,
    IteratedLogUndefined,
    MemoryCapExceeded,
    NotMonotone,
    NumericalNegativity,
    ParameterOutOfRange,
    SeriesDivergent,
)
from .local_times import ObservableF
from .walks import StepDistribution

DEFAULT_MEM_CAP = 1 << 30

#: on-grid growth-detection factor for condition checks: the envelope
#: ratio S(n)/env(n) failing by more than this between mid-grid and
#: top-of-grid marks the condition as failing on the grid
GROWTH_LIMIT = 1.5

_NEG_CLAMP = -1e-10


# ---------------------------------------------------------------------------
# return-probability series u_n = P{S_n = 0}
# ---------------------------------------------------------------------------

def compute_u_series(dist: StepDistribution, n_horizon: int, *,
                     mem_cap: int = DEFAULT_MEM_CAP, exact: bool = False,
                     force_dp: bool = False):
    """Return probabilities u_0..u_N.

    Recognized laws (simple(d), +-1 walks on Z) use combinatorial closed
    forms; anything else runs a dense self-convolution DP over the
    reachable box, subject to ``mem_cap`` bytes.  ``exact=True`` gives
    rational arithmetic (d=1 only).
    """
    if n_horizon < 0:
        raise ParameterOutOfRange("horizon must be >= 0")
    if exact:
        if dist.dim != 1:
            raise DimensionUnsupported("rational mode supports d=1 only")
        if dist.exact_probs is None:
            raise ParameterOutOfRange("rational mode needs rational probabilities")
        return _u_rational_1d(dist, n_horizon)
    if not force_dp:
        p_up = _match_pm1(dist)
        if p_up is not None:
            return _u_pm1(p_up, n_horizon)
        d_simple = _match_simple(dist)
        if d_simple is not None:
            return _u_simple(d_simple, n_horizon)
    return _u_dp(dist, n_horizon, mem_cap)


def _match_pm1(dist) -> float | None:
    if dist.dim == 1 and dist.sites == ((-1,), (1,)):
        return float(dist.probs[1])
    return None


def _match_simple(dist) -> int | None:
    d = dist.dim
    expect = set()
    for i in range(d):
        e = [0] * d
        e[i] = 1
        expect.add(tuple(e))
        e = [0] * d
        e[i] = -1
        expect.add(tuple(e))
    if set(dist.sites) == expect and np.allclose(dist.probs, 1.0 / (2 * d)):
        return d
    return None


def _u_pm1(p: float, n_horizon: int) -> np.ndarray:
    """u_{2m} = C(2m, m) (pq)^m for the +-1 walk with P{+1} = p."""
    u = np.zeros(n_horizon + 1)
    u[0] = 1.0
    pq = p * (1.0 - p)
    val = 1.0
    for m in range(n_horizon // 2):
        val *= 2.0 * (2 * m + 1) / (m + 1) * pq
        u[2 * (m + 1)] = val
    return u


def _central_binom_halves(n_horizon: int) -> np.ndarray:
    """b[m] = C(2m, m) 2^{-2m} for 2m <= N."""
    m_max = n_horizon // 2
    b = np.ones(m_max + 1)
    for m in range(m_max):
        b[m + 1] = b[m] * (2 * m + 1) / (2 * m + 2)
    return b


def _u_simple(d: int, n_horizon: int) -> np.ndarray:
    """Simple random walk on Z^d.

    d=1 is the central-binomial form and d=2 its square (two independent
    diagonal components).  For d >= 3 the step count per axis is
    multinomial, so the trinomial-type sum factors as a binomial mixture
    over the first axis against the (d-1)-dimensional law; evaluating it
    that way costs O(N^2) instead of O(N^3).
    """
    b = _central_binom_halves(n_horizon)
    u1 = np.zeros(n_horizon + 1)
    u1[0::2] = b
    if d == 1:
        return u1
    u2 = np.zeros(n_horizon + 1)
    u2[0::2] = b * b
    if d == 2:
        return u2
    lg = np.zeros(n_horizon + 2)
    lg[1:] = np.cumsum(np.log(np.arange(1, n_horizon + 2)))  # lg[k] = log k!
    prev = u2
    for i in range(3, d + 1):
        cur = np.zeros(n_horizon + 1)
        cur[0] = 1.0
        log_pi = math.log(1.0 / i)
        log_qi = math.log((i - 1.0) / i)
        for n in range(2, n_horizon + 1, 2):
            ks = np.arange(0, n + 1, 2)
            logw = (lg[n] - lg[ks] - lg[n - ks]) + ks * log_pi + (n - ks) * log_qi
            cur[n] = float(np.dot(np.exp(logw), u1[ks] * prev[n - ks]))
        prev = cur
    return prev


def _u_dp(dist, n_horizon: int, mem_cap: int) -> np.ndarray:
    d, radius = dist.dim, dist.max_radius
    side = 2 * n_horizon * radius + 1
    need = 2 * 8 * side**d
    if need > mem_cap:
        raise MemoryCapExceeded(
            f"dense DP needs {need} bytes over a {side}^{d} box (cap {mem_cap}); "
            "use a recognized closed-form law or the Monte Carlo estimator")
    grid = np.zeros((side,) * d)
    center = (n_horizon * radius,) * d
    grid[center] = 1.0
    u = np.zeros(n_horizon + 1)
    u[0] = 1.0
    probs = dist.probs
    sites = dist.sites
    for n in range(1, n_horizon + 1):
        nxt = np.zeros_like(grid)
        for site, p in zip(sites, probs):
            src = tuple(slice(max(-o, 0), side - max(o, 0)) for o in site)
            dst = tuple(slice(max(o, 0), side + min(o, 0)) for o in site)
            nxt[dst] += p * grid[src]
        grid = nxt
        u[n] = grid[center]
    return u


def _u_rational_1d(dist, n_horizon: int) -> list[Fraction]:
    probs = {s[0]: p for s, p in zip(dist.sites, dist.exact_probs)}
    cur = {0: Fraction(1)}
    u = [Fraction(1)]
    for _ in range(n_horizon):
        nxt: dict[int, Fraction] = {}
        for pos, w in cur.items():
            for step, p in probs.items():
                key = pos + step
                nxt[key] = nxt.get(key, Fraction(0)) + w * p
        cur = nxt
        u.append(cur.get(0, Fraction(0)))
    return u


# ---------------------------------------------------------------------------
# first-return deconvolution and the escape probability
# ---------------------------------------------------------------------------

def first_return_series(u):
    """First-return law f_n = P{tau = n} deconvolved from u.

    Uses the renewal identity u_n = sum_{k<=n} f_k u_{n-k}; reconvolving
    the output against u reproduces u to rounding accuracy.  Tiny
    negative values from double rounding are clamped to 0; anything
    below -1e-10 signals an inconsistent input and raises.
    """
    if isinstance(u[0], Fraction):
        return _first_return_exact(u)
    u = np.asarray(u, dtype=np.float64)
    if u[0] != 1.0:
        raise ParameterOutOfRange("u_0 must equal 1")
    n_horizon = len(u) - 1
    f = np.zeros(n_horizon + 1)
    for n in range(1, n_horizon + 1):
        val = u[n] - float(np.dot(f[1:n], u[n - 1:0:-1]))
        if val < _NEG_CLAMP:
            raise NumericalNegativity(f"f_{n} = {val} below clamp threshold")
        f[n] = max(val, 0.0)
    return f


def _first_return_exact(u):
    if u[0] != 1:
        raise ParameterOutOfRange("u_0 must equal 1")
    f = [Fraction(0)] * len(u)
    for n in range(1, len(u)):
        acc = u[n]
        for k in range(1, n):
            acc -= f[k] * u[n - k]
        if acc < 0:
            raise NumericalNegativity(f"exact deconvolution gave f_{n} = {acc} < 0")
        f[n] = acc
    return f


def renewal_residual(u, f_tau) -> float:
    """max_n |u_n - sum_{k<=n} f_k u_{n-k}| over n = 1..N."""
    u = np.asarray(u, dtype=np.float64)
    f = np.asarray(f_tau, dtype=np.float64)
    conv = np.convolve(f, u)[: len(u)]
    return float(np.abs(conv[1:] - u[1:]).max())


@dataclass
class GammaSummary:
    """Escape-probability summary derived from a truncated series."""

    gamma_n: np.ndarray
    gamma_upper: float
    gamma_estimate: float
    error_bound: float
    recurrent: bool
    trivial_transient: bool
    template: tuple | None


def gamma_summary(f_tau, u, dist: StepDistribution | None = None,
                  template: tuple | None = None) -> GammaSummary:
    """Finite-horizon escape probabilities and a tail-corrected estimate.

    gamma_n = P{no return by n} is exact; the point estimate subtracts a
    first-return tail reconstructed from a fitted decay template of u
    (geometric for drifting laws, n^{-r/2} for centered laws of lattice
    rank r).  Recurrent laws are flagged instead of certified.
    """
    u = np.asarray(u, dtype=np.float64)
    f = np.asarray(f_tau, dtype=np.float64)
    gamma_n = 1.0 - np.cumsum(f)
    gamma_n[0] = 1.0
    gamma_last = float(gamma_n[-1])
    gamma_upper = float(min(gamma_last, 1.0 / u.sum()))
    trivial = gamma_last >= 1.0 - 1e-15
    if template is None and dist is not None:
        if np.any(np.abs(dist.mean_drift()) > 1e-12):
            template = ("geometric",)
        else:
            template = ("power", dist.lattice_rank() / 2.0)
    tail_u = 0.0 if trivial else _u_tail_estimate(u, template)
    recurrent = (not trivial) and (not math.isfinite(tail_u) or gamma_last < 1e-6)
    if trivial:
        estimate, err = 1.0, 0.0
    elif recurrent:
        estimate, err = 0.0, gamma_upper
    else:
        # one fixed-point refinement of the tail transfer f_tail ~ gamma^2 u_tail
        est = gamma_last - gamma_last**2 * tail_u
        estimate = max(gamma_last - est**2 * tail_u, 0.0)
        err = gamma_last - estimate
    return GammaSummary(gamma_n=gamma_n, gamma_upper=gamma_upper,
                        gamma_estimate=estimate, error_bound=err,
                        recurrent=recurrent, trivial_transient=trivial,
                        template=template)


def _u_tail_estimate(u, template: tuple | None) -> float:
    """Estimated sum of u beyond the horizon, from a tail-template fit."""
    n_horizon = len(u) - 1
    nz = np.flatnonzero(u[1:]) + 1
    if nz.size == 0:
        return 0.0
    window = nz[nz >= max(n_horizon // 2, nz[0])]
    if window.size < 3:
        window = nz[-min(len(nz), 8):]
    if window.size < 3:
        return 0.0  # horizon too short for any tail fit
    step = int(np.gcd.reduce(np.diff(window)))
    ns = window.astype(np.float64)
    logs = np.log(u[window])
    if template is None:
        res_geo = _lin_resid(ns, logs)
        res_pow = _lin_resid(np.log(ns), logs)
        template = ("geometric",) if res_geo <= res_pow else ("power", None)
    if template[0] == "geometric":
        slope = _lin_slope(ns, logs)
        ratio = math.exp(slope * step)
        if ratio >= 1.0:
            return math.inf
        return float(u[window[-1]]) * ratio / (1.0 - ratio)
    beta = template[1]
    if beta is None:
        beta = -_lin_slope(np.log(ns), logs)
    if beta <= 1.0:
        return math.inf
    log_k = float(np.mean(logs + beta * np.log(ns)))
    n_last = int(window[-1])
    # sum over k = n_last + step*m, m >= 1 of K k^-beta
    return math.exp(log_k) * step**-beta * float(_hurwitz_zeta(beta, n_last / step + 1))


def _lin_slope(x, y) -> float:
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def _lin_resid(x, y) -> float:
    s = _lin_slope(x, y)
    r = (y - y.mean()) - s * (x - x.mean())
    return float(np.dot(r, r))


@dataclass
class ReturnSeries:
    """Exact finite-horizon return/first-return series with gamma summary."""

    n_horizon: int
    u: np.ndarray
    f_tau: np.ndarray
    summary: GammaSummary

    @property
    def gamma_n(self):
        return self.summary.gamma_n

    @property
    def gamma_upper(self):
        return self.summary.gamma_upper

    @property
    def gamma_estimate(self):
        return self.summary.gamma_estimate

    @property
    def error_bound(self):
        return self.summary.error_bound


def return_series(dist: StepDistribution, n_horizon: int, *,
                  mem_cap: int = DEFAULT_MEM_CAP,
                  template: tuple | None = None) -> ReturnSeries:
    u = compute_u_series(dist, n_horizon, mem_cap=mem_cap)
    f_tau = first_return_series(u)
    summary = gamma_summary(f_tau, u, dist=dist, template=template)
    return ReturnSeries(n_horizon=n_horizon, u=u, f_tau=f_tau, summary=summary)


def expected_range(gamma_n, n: int) -> float:
    """E L_n(0) = sum_{k<=n} gamma_k (each step visits a new site with
    probability gamma_k)."""
    if n >= len(gamma_n):
        raise HorizonExceeded(f"n={n} beyond horizon {len(gamma_n) - 1}")
    return float(np.sum(gamma_n[: n + 1]))


def lambda_star(gamma: float) -> float:
    """Geometric decay rate log(1/(1-gamma)) of a site's total visits."""
    if not 0.0 < gamma < 1.0:
        raise GammaOutOfRange(f"gamma must be in (0,1), got {gamma}")
    return -math.log1p(-gamma)


# ---------------------------------------------------------------------------
# exact E Q_n(j) and E G_n(f)
# ---------------------------------------------------------------------------

@dataclass
class ExactQTable:
    """EQ[n, j] = expected number of sites visited exactly j times by n.

    Built from the first-return representation: EQ(., 1) is the
    self-convolution of the no-return probabilities, and each next
    column is the previous one convolved with the first-return law
    (horizon-clipped, which is exact because later mass cannot reach
    time n).  Columns stop once everything falls below the tail
    tolerance; absent columns read as 0.
    """

    n_horizon: int
    j_max: int
    eq: np.ndarray
    series: ReturnSeries
    tol: float

    def expected_Q(self, n: int, j: int) -> float:
        if not 0 <= n <= self.n_horizon:
            raise HorizonExceeded(f"n={n} beyond horizon {self.n_horizon}")
        if j < 1:
            raise ParameterOutOfRange("j must be >= 1")
        if j > self.j_max:
            return 0.0
        return float(self.eq[n, j])

    def expected_G(self, f: ObservableF, n: int) -> float:
        fv = f.values(np.arange(self.j_max + 1))
        return self.expected_G_values(fv, n)

    def expected_G_values(self, fv: np.ndarray, n: int) -> float:
        if not 0 <= n <= self.n_horizon:
            raise HorizonExceeded(f"n={n} beyond horizon {self.n_horizon}")
        j_hi = min(len(fv) - 1, self.j_max)
        return float(np.dot(fv[1:j_hi + 1], self.eq[n, 1:j_hi + 1]))

    def conservation(self, n: int) -> float:
        js = np.arange(1, self.j_max + 1, dtype=np.float64)
        return float(np.dot(js, self.eq[n, 1:]))


def build_eq_table(dist: StepDistribution | None = None,
                   n_horizon: int | None = None, *,
                   series: ReturnSeries | None = None,
                   tol: float = 1e-10, j_cap: int | None = None) -> ExactQTable:
    if series is None:
        if dist is None or n_horizon is None:
            raise ParameterOutOfRange("need a distribution + horizon or a series")
        series = return_series(dist, n_horizon)
    n_hor = series.n_horizon
    gamma_n = series.gamma_n
    f_tau = series.f_tau
    gg = np.convolve(gamma_n, gamma_n)[: n_hor + 1]
    gam = min(max(series.gamma_estimate, 1e-3), 1.0 - 1e-12)
    x = 1.0 - 0.9 * gam  # margined visit-count decay for the column cutoff
    j_max = 2
    while (n_hor + 1) * x ** (j_max - 1) * (j_max * gam + 1) / gam**2 > tol and j_max <= n_hor:
        j_max += 1
    if j_cap is not None:
        j_max = min(j_max, j_cap)
    j_max = min(j_max, n_hor + 1)
    eq = np.zeros((n_hor + 1, j_max + 1))
    col = gg.copy()
    eq[:, 1] = col
    for j in range(2, j_max + 1):
        col = np.convolve(col, f_tau)[: n_hor + 1]
        if not col.any():
            j_max = j - 1
            eq = eq[:, : j_max + 1]
            break
        eq[:, j] = col
    return ExactQTable(n_horizon=n_hor, j_max=j_max, eq=eq, series=series, tol=tol)


def exact_EQ(f_tau, gamma_n, n: int, j: int) -> float:
    """E Q_n(j) = sum_s P{tau_1+..+tau_{j-1} = s} * sum_{n0} gamma_{n0}
    gamma_{n-s-n0}, with the (j-1)-fold convolution horizon-clipped."""
    if j < 1:
        raise ParameterOutOfRange("j must be >= 1")
    gamma_n = np.asarray(gamma_n, dtype=np.float64)
    f_tau = np.asarray(f_tau, dtype=np.float64)
    if n < 0 or n >= len(gamma_n):
        raise HorizonExceeded(f"n={n} beyond horizon {len(gamma_n) - 1}")
    gg = np.convolve(gamma_n[: n + 1], gamma_n[: n + 1])[: n + 1]
    power = np.zeros(n + 1)
    power[0] = 1.0
    for _ in range(j - 1):
        power = np.convolve(power, f_tau[: n + 1])[: n + 1]
        if not power.any():
            return 0.0
    return float(np.dot(power, gg[::-1]))


_EQ_CACHE: dict[tuple, ExactQTable] = {}
_EQ_LOCK = threading.Lock()


def get_eq_table(dist: StepDistribution, n_horizon: int,
                 tol: float = 1e-10) -> ExactQTable:
    """Memoized EQ table; reuses any cached table with horizon >= n."""
    key = dist.fingerprint()
    with _EQ_LOCK:
        hit = _EQ_CACHE.get(key)
        if hit is not None and hit.n_horizon >= n_horizon and hit.tol <= tol:
            return hit
        table = build_eq_table(dist, n_horizon, tol=tol)
        _EQ_CACHE[key] = table
        return table


# ---------------------------------------------------------------------------
# limit constants
# ---------------------------------------------------------------------------

def limit_constant(f: ObservableF, gamma: float, tol: float = 1e-12) -> float:
    return limit_constant_detail(f, gamma, tol)[0]


def limit_constant_detail(f: ObservableF, gamma: float,
                          tol: float = 1e-12) -> tuple[float, float]:
    """(limit, remainder bound) of gamma^2 sum_j f(j) (1-gamma)^{j-1}.

    Closed forms for the low power moments and indicators; geometric
    partial sums with an explicit remainder envelope otherwise.  The
    trivially transient boundary gamma = 1 is allowed (the series
    collapses to its first term).
    """
    if not 0.0 < gamma <= 1.0:
        raise GammaOutOfRange(f"gamma must be in (0,1], got {gamma}")
    if tol <= 0:
        raise ParameterOutOfRange("tol must be positive")
    x = 1.0 - gamma
    g2 = gamma * gamma
    if f.kind == "power":
        if f.alpha == 0.0:
            return gamma, 0.0
        if f.alpha == 1.0:
            return 1.0, 0.0
        if f.alpha == 2.0:
            return g2 * (1.0 + x) / gamma**3, 0.0
        return _partial_limit(lambda j: float(j) ** f.alpha, x, g2, tol,
                              growth=lambda j: (1.0 + 1.0 / j) ** f.alpha)
    if f.kind == "indicator":
        if f.cofinite:
            base = 1.0 / gamma
            drop = math.fsum(x ** (j - 1) for j in sorted(f.excluded))
            return g2 * (base - drop), 0.0
        return g2 * math.fsum(x ** (j - 1) for j in sorted(f.members)), 0.0
    if f.kind == "exp_capped":
        r = math.exp(f.c) * x
        if abs(r - 1.0) <= 1e-9:
            if f.p <= 1.0:
                raise SeriesDivergent(
                    "f grows like exp(j*lambda*) without summable polynomial damping")
            # sum e^{cj} x^{j-1} / j^p = x^{-1} zeta(p) at the critical rate
            return g2 / x * float(_hurwitz_zeta(f.p, 1.0)), 0.0
        if r > 1.0:
            raise SeriesDivergent(f"term ratio exp(c)(1-gamma) = {r} >= 1")
        return _partial_limit(
            f.value, x, g2, tol,
            growth=lambda j: math.exp(f.c) * max(1.0, (j / (j + 1.0)) ** f.p))
    # table
    m = len(f.table)
    head = g2 * math.fsum(f.table[j - 1] * x ** (j - 1) for j in range(1, m + 1))
    if f.tail_rule == "zero":
        return head, 0.0
    if f.tail_rule == "last":
        return head + g2 * f.table[-1] * x**m / gamma, 0.0
    beta = f._tail_beta()
    tail, rem = _partial_limit(f.value, x, g2, tol, start=m + 1,
                               growth=lambda j: max(1.0, (1.0 + 1.0 / j) ** beta))
    return head + tail, rem


def _partial_limit(value, x, g2, tol, growth, start=1):
    """Partial sum of g2 * f(j) x^{j-1} with a geometric remainder bound.

    ``growth(j)`` bounds |f(j+1)/f(j)|; iteration stops once the
    remainder envelope term/(1-rho) falls below tol.
    """
    total = 0.0
    j = start
    term = abs(value(j)) * x ** (j - 1)
    while True:
        total += value(j) * x ** (j - 1)
        j += 1
        term = abs(value(j)) * x ** (j - 1)
        rho = growth(j) * x if growth(j) * x < 1.0 else math.nan
        if not math.isnan(rho) and term / (1.0 - rho) < tol / g2:
            return g2 * total, g2 * term / (1.0 - rho)
        if j - start > 10_000_000:
            raise SeriesDivergent("limit series did not converge within budget")


# ---------------------------------------------------------------------------
# variance bound
# ---------------------------------------------------------------------------

def variance_bound(f: ObservableF, n: int, u, gamma: float, *,
                   table: ExactQTable | None = None,
                   dist: StepDistribution | None = None,
                   allow_split: bool = False) -> float:
    """Upper bound on Var G_n(f) for non-decreasing f with f(0) = 0:

        E G_n(f^2) + 4 sum_i f(i) df(i) (1-gamma)^{i-1}
                       * sum_r r (n-r) u_r.

    Non-monotone f must opt into the increment split f = f1 - f2, which
    bounds Var G <= 2 Var G(f1) + 2 Var G(f2) part by part.
    """
    if table is None:
        if dist is None:
            raise ParameterOutOfRange("need an EQ table or a distribution")
        table = get_eq_table(dist, n)
    if n > table.n_horizon or n >= len(u):
        raise HorizonExceeded(f"n={n} beyond available horizon")
    lam = lambda_star(gamma)
    i_cap = min(n, int(745.0 / lam) + 2)  # beyond this (1-gamma)^{i-1} underflows
    j_hi = max(table.j_max, i_cap)
    fv = f.values(np.arange(j_hi + 1))
    dfv = np.diff(fv)
    if np.all(dfv >= -1e-12):
        return _vb_monotone(fv, n, u, gamma, table, i_cap)
    if not allow_split:
        raise NotMonotone(f"{f.label} decreases somewhere; pass allow_split=True")
    f1 = np.concatenate([[0.0], np.cumsum(np.clip(dfv, 0.0, None))])
    f2 = np.concatenate([[0.0], np.cumsum(np.clip(-dfv, 0.0, None))])
    return 2.0 * _vb_monotone(f1, n, u, gamma, table, i_cap) + \
        2.0 * _vb_monotone(f2, n, u, gamma, table, i_cap)


def _vb_monotone(fv, n, u, gamma, table, i_cap):
    eg2 = table.expected_G_values(fv * fv, n)
    i = np.arange(1, i_cap + 1, dtype=np.float64)
    decay = (1.0 - gamma) ** (i - 1.0)
    inc_sum = float(np.dot(fv[1:i_cap + 1] * np.diff(fv[:i_cap + 1]), decay))
    r = np.arange(1, n + 1, dtype=np.float64)
    w = float(np.dot(r * (n - r), np.asarray(u, dtype=np.float64)[1:n + 1]))
    return eg2 + 4.0 * inc_sum * w


# ---------------------------------------------------------------------------
# partial-sum growth conditions on sum k u_k
# ---------------------------------------------------------------------------

@dataclass
class BoundCertificate:
    """Reproducible verdict: name, parameters, and the evidence rows."""

    name: str
    params: dict
    evidence: list[dict]
    verdict: str

    @property
    def holds(self) -> bool:
        return self.verdict.startswith("Holds")


def condition_check(u, mode: str, n_grid, eta: float | None = None) -> BoundCertificate:
    """On-grid check of S(n) = sum_{k<=n} k u_k against an envelope.

    ``log`` mode checks S(n) <= C log n, ``eta`` mode S(n) <= C n^{1-eta}.
    The fitted C is the largest ratio on the grid; the verdict fails when
    the ratio still grows by more than GROWTH_LIMIT between mid-grid and
    the top of the grid.
    """
    u = np.asarray(u, dtype=np.float64)
    grid = sorted(int(n) for n in n_grid)
    if not grid or grid[0] < 2:
        raise ParameterOutOfRange("grid points must be >= 2")
    if grid[-1] >= len(u):
        raise HorizonExceeded("u series shorter than the grid")
    if mode == "eta":
        if eta is None or not 0.0 < eta < 1.0:
            raise ParameterOutOfRange(f"eta mode needs eta in (0,1), got {eta}")
        name = "condition-7"
        env = lambda n: float(n) ** (1.0 - eta)
    elif mode == "log":
        name = "condition-8"
        env = math.log
    else:
        raise ParameterOutOfRange(f"mode must be 'log' or 'eta', got {mode!r}")
    s_all = np.cumsum(np.arange(len(u), dtype=np.float64) * u)
    rows = [{"n": n, "S": float(s_all[n]), "envelope": env(n),
             "ratio": float(s_all[n]) / env(n)} for n in grid]
    c_fit = max(r["ratio"] for r in rows)
    if len(rows) < 2:
        verdict = "Holds-on-grid"
        growth = 1.0
    else:
        top = rows[-1]
        mid = min(rows[:-1], key=lambda r: abs(r["n"] - top["n"] / 2))
        if mid["ratio"] == 0.0:
            growth = math.inf if top["ratio"] > 0 else 1.0
        else:
            growth = top["ratio"] / mid["ratio"]
        verdict = "Fails-on-grid" if growth > GROWTH_LIMIT else "Holds-on-grid"
    params = {"mode": mode, "C": c_fit, "growth": growth,
              "growth_limit": GROWTH_LIMIT}
    if eta is not None:
        params["eta"] = eta
    return BoundCertificate(name=name, params=params, evidence=rows, verdict=verdict)


# ---------------------------------------------------------------------------
# maximal local time
# ---------------------------------------------------------------------------

def maxlocal_tail_bound(n: int, t: int, gamma: float) -> float:
    """P{l(n) > t} <= min(1, n (1-gamma)^{t-1})."""
    if t < 1:
        raise ParameterOutOfRange("t must be >= 1")
    if not 0.0 < gamma <= 1.0:
        raise GammaOutOfRange(f"gamma must be in (0,1], got {gamma}")
    return min(1.0, n * (1.0 - gamma) ** (t - 1))


def iterated_log(x: float, m: int) -> float:
    """m-fold iterated natural logarithm; log_(0) is the identity."""
    if m < 0:
        raise ParameterOutOfRange("m must be >= 0")
    v = float(x)
    for _ in range(m):
        if v <= 0.0:
            raise IteratedLogUndefined(f"log of non-positive value {v}")
        v = math.log(v)
    return v


def maxlocal_proposition_bound(n: int, eps: float, m: int, gamma: float) -> float:
    """Almost-sure upper envelope for the maximal local time:

        1 + (log n + ... + log_(m) n + (1+eps) log_(m+1) n) / lambda*.

    ``m`` counts the unweighted iterated-log terms; m=0 gives
    1 + (1+eps) log n / lambda*.
    """
    if eps <= 0:
        raise ParameterOutOfRange("eps must be > 0")
    if m < 0:
        raise ParameterOutOfRange("m must be >= 0")
    lam = lambda_star(gamma)
    terms = [iterated_log(n, i) for i in range(1, m + 2)]
    if terms[-1] <= 0.0:
        raise IteratedLogUndefined(
            f"log_({m + 1})({n}) = {terms[-1]} is not positive")
    return 1.0 + (math.fsum(terms[:-1]) + (1.0 + eps) * terms[-1]) / lam


def truncation_thresholds(n: int, gamma: float, case: str,
                          eta: float | None = None) -> tuple[float, float | None]:
    """Visit-count cut levels for the truncated-functional decomposition.

    Case ``ii``: cut1 = log(n)/lambda*, cut2 = (log n + b_n)/lambda* with
    b_n = log_(2) n + 2 log_(3) n (needs log_(3) n > 0).  Case ``i``:
    cut1 = (eta/2) log(n)/lambda*, no upper cut.
    """
    if n < 3:
        raise ParameterOutOfRange("n must be >= 3")
    lam = lambda_star(gamma)
    if case == "i":
        if eta is None or not 0.0 < eta < 1.0:
            raise ParameterOutOfRange(f"case i needs eta in (0,1), got {eta}")
        return (eta / 2.0) * math.log(n) / lam, None
    if case != "ii":
        raise ParameterOutOfRange(f"case must be 'i' or 'ii', got {case!r}")
    l3 = iterated_log(n, 3)
    if l3 <= 0.0:
        raise IteratedLogUndefined(f"log_(3)({n}) = {l3} is not positive")
    b_n = iterated_log(n, 2) + 2.0 * l3
    cut1 = math.log(n) / lam
    return cut1, cut1 + b_n / lam
