"""Streaming local-time statistics and observable functionals.

The walk starts at the origin and S_0 counts as a visit, so a fresh
state has l(0, 0) = 1 and one singly-visited site.  Ingesting a step
costs O(1) amortized: when a site's count rises from i to i+1 the
multiplicity histogram moves one unit from bin i to bin i+1 and every
registered running functional gains f(i+1) - f(i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import NegativeAlpha, ParameterOutOfRange, UnregisteredObservable

_TAIL_RULES = ("zero", "last", "power")


@dataclass(frozen=True)
class ObservableF:
    """A function f: Z+ -> R with f(0) = 0, in one of four growth forms.

    * ``power``: f(i) = i**alpha (alpha >= 0)
    * ``indicator``: f(i) = 1 for i in a finite set, or in the co-finite
      set {i >= 1} minus ``excluded``
    * ``table``: explicit f(1..m) with a tail rule beyond m
      (``zero`` | ``last`` | ``power`` extrapolation from the last two
      values)
    * ``exp_capped``: f(i) = exp(c*i) / i**p
    """

    kind: str
    alpha: float = 0.0
    members: frozenset[int] = frozenset()
    cofinite: bool = False
    excluded: frozenset[int] = frozenset()
    table: tuple[float, ...] = ()
    tail_rule: str = "zero"
    c: float = 0.0
    p: float = 0.0

    # --- constructors -------------------------------------------------
    @staticmethod
    def power(alpha: float) -> "ObservableF":
        if alpha < 0:
            raise ParameterOutOfRange(f"power exponent must be >= 0, got {alpha}")
        return ObservableF(kind="power", alpha=float(alpha))

    @staticmethod
    def indicator(members: Iterable[int]) -> "ObservableF":
        ms = frozenset(int(j) for j in members)
        if any(j < 1 for j in ms):
            raise ParameterOutOfRange("indicator members must be >= 1")
        return ObservableF(kind="indicator", members=ms)

    @staticmethod
    def indicator_at_least(j_min: int) -> "ObservableF":
        if j_min < 1:
            raise ParameterOutOfRange("j_min must be >= 1")
        return ObservableF(kind="indicator", cofinite=True,
                           excluded=frozenset(range(1, int(j_min))))

    @staticmethod
    def indicator_cofinite(excluded: Iterable[int] = ()) -> "ObservableF":
        return ObservableF(kind="indicator", cofinite=True,
                           excluded=frozenset(int(j) for j in excluded))

    @staticmethod
    def from_table(values: Iterable[float], tail_rule: str = "zero") -> "ObservableF":
        vals = tuple(float(v) for v in values)
        if not vals:
            raise ParameterOutOfRange("table needs at least one value")
        if tail_rule not in _TAIL_RULES:
            raise ParameterOutOfRange(f"tail_rule must be one of {_TAIL_RULES}")
        if tail_rule == "power":
            if len(vals) < 2 or vals[-1] <= 0 or vals[-2] <= 0:
                raise ParameterOutOfRange(
                    "power tail extrapolation needs two positive trailing values")
        return ObservableF(kind="table", table=vals, tail_rule=tail_rule)

    @staticmethod
    def exp_capped(c: float, p: float) -> "ObservableF":
        return ObservableF(kind="exp_capped", c=float(c), p=float(p))

    # --- evaluation ---------------------------------------------------
    def value(self, j: int) -> float:
        if j <= 0:
            return 0.0
        if self.kind == "power":
            return float(j) ** self.alpha
        if self.kind == "indicator":
            if self.cofinite:
                return 0.0 if j in self.excluded else 1.0
            return 1.0 if j in self.members else 0.0
        if self.kind == "table":
            m = len(self.table)
            if j <= m:
                return self.table[j - 1]
            if self.tail_rule == "zero":
                return 0.0
            if self.tail_rule == "last":
                return self.table[-1]
            beta = self._tail_beta()
            return self.table[-1] * (j / m) ** beta
        # exp_capped
        try:
            return math.exp(self.c * j) / float(j) ** self.p
        except OverflowError:
            return math.inf

    def values(self, js) -> np.ndarray:
        js = np.asarray(js)
        return np.array([self.value(int(j)) for j in js.ravel()],
                        dtype=np.float64).reshape(js.shape)

    def _tail_beta(self) -> float:
        m = len(self.table)
        return math.log(self.table[-1] / self.table[-2]) / math.log(m / (m - 1))

    def is_nondecreasing(self, up_to: int = 4096) -> bool:
        prev = 0.0
        for j in range(1, up_to + 1):
            v = self.value(j)
            if v < prev - 1e-15:
                return False
            prev = v
        return True

    # --- naming --------------------------------------------------------
    @property
    def label(self) -> str:
        if self.kind == "power":
            return f"power_{_fmt(self.alpha)}"
        if self.kind == "indicator":
            if self.cofinite:
                if not self.excluded:
                    return "ind_ge1"
                if self.excluded == frozenset(range(1, max(self.excluded) + 1)):
                    return f"ind_ge{max(self.excluded) + 1}"
                return "ind_not_" + "-".join(str(j) for j in sorted(self.excluded))
            return "ind_" + "-".join(str(j) for j in sorted(self.members))
        if self.kind == "table":
            return f"table_m{len(self.table)}_{self.tail_rule}"
        return f"exp_c{_fmt(self.c)}_p{_fmt(self.p)}"


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


class Condition(Enum):
    """Verdict of the growth-condition classifier for an observable."""

    SATISFIED_4 = "Satisfied(4)"
    SATISFIED_5_ONLY = "Satisfied(5)only"
    UNCLASSIFIED = "Unclassified"


def check_condition_f(f: ObservableF, gamma: float) -> Condition:
    """Classify f against the square-summability condition (variance
    route) and the weaker absolute-summability condition.

    power and indicator forms always satisfy the strong condition; the
    exponential form is classified against half the decay rate
    lambda* = log(1/(1-gamma)); tables use a partial-sum heuristic.
    """
    if not 0 < gamma < 1:
        raise ParameterOutOfRange(f"gamma must be in (0,1), got {gamma}")
    lam = -math.log1p(-gamma)
    if f.kind in ("power", "indicator"):
        return Condition.SATISFIED_4
    if f.kind == "exp_capped":
        if 2 * f.c < lam or (2 * f.c == lam and 2 * f.p > 2):
            return Condition.SATISFIED_4
        if f.c < lam or (f.c <= lam and f.p > 1):
            return Condition.SATISFIED_5_ONLY
        return Condition.UNCLASSIFIED
    # table: compare partial-sum increments over two windows
    x = 1.0 - gamma
    if _partial_sum_converges(lambda j: f.value(j) ** 2 * j * x**j):
        return Condition.SATISFIED_4
    if _partial_sum_converges(lambda j: abs(f.value(j)) * x**j):
        return Condition.SATISFIED_5_ONLY
    return Condition.UNCLASSIFIED


def _partial_sum_converges(term, window: int = 256) -> bool:
    inc1 = math.fsum(term(j) for j in range(1, window + 1))
    inc2 = math.fsum(term(j) for j in range(window + 1, 2 * window + 1))
    inc3 = math.fsum(term(j) for j in range(2 * window + 1, 4 * window + 1))
    if inc1 == 0.0:
        return True
    return inc3 <= inc2 * 0.9 or (inc2 + inc3) < 1e-12 * inc1


@dataclass
class Checkpoint:
    """Immutable snapshot of a LocalTimeState at time n."""

    n: int
    range: int
    l_max: int
    g: dict[str, float]
    l: dict[float, float]
    histogram: dict[int, int] | None = None


class LocalTimeState:
    """Per-trajectory local-time field plus running functionals.

    Single-writer: one state belongs to one replica.  This is the
    reference implementation the batch kernels are tested against.
    """

    def __init__(self, dim: int, observables: Iterable[ObservableF] = ()):
        self.dim = dim
        origin = (0,) * dim
        self._pos = origin
        self.counts: dict[tuple[int, ...], int] = {origin: 1}
        self.histogram: dict[int, int] = {1: 1}
        self.n = 0
        self.range = 1
        self.l_max = 1
        self.observables: dict[str, ObservableF] = {}
        self.g_running: dict[str, float] = {}
        for obs in observables:
            self.observables[obs.label] = obs
            self.g_running[obs.label] = obs.value(1)

    def ingest_step(self, increment: Iterable[int]) -> "LocalTimeState":
        pos = tuple(a + int(b) for a, b in zip(self._pos, increment))
        self._pos = pos
        c_old = self.counts.get(pos, 0)
        c = c_old + 1
        self.counts[pos] = c
        if c == 1:
            self.range += 1
            self.histogram[1] = self.histogram.get(1, 0) + 1
        else:
            if self.histogram[c_old] == 1:
                del self.histogram[c_old]
            else:
                self.histogram[c_old] -= 1
            self.histogram[c] = self.histogram.get(c, 0) + 1
            if c > self.l_max:
                self.l_max = c
        for label, obs in self.observables.items():
            self.g_running[label] += obs.value(c) - obs.value(c_old)
        self.n += 1
        return self

    def ingest_block(self, increments) -> "LocalTimeState":
        for row in np.asarray(increments, dtype=np.int64):
            self.ingest_step(row)
        return self

    def checkpoint(self, alphas: Iterable[float] = (),
                   include_histogram: bool = False) -> Checkpoint:
        return Checkpoint(
            n=self.n,
            range=self.range,
            l_max=self.l_max,
            g=dict(self.g_running),
            l={a: functional_L(self, a) for a in alphas},
            histogram=dict(self.histogram) if include_histogram else None,
        )


def functional_G(state, f: ObservableF, mode: str = "auto") -> float:
    """G_n(f) = sum over sites of f(local time).

    ``running`` reads the per-step accumulator (f must have been
    registered at state creation); ``replay`` recomputes from the
    multiplicity histogram; ``auto`` prefers running.
    """
    hist = state.histogram if isinstance(state, (LocalTimeState, Checkpoint)) else None
    if isinstance(state, LocalTimeState):
        registered = f.label in state.observables
        if mode == "running" and not registered:
            raise UnregisteredObservable(f.label)
        if mode in ("running", "auto") and registered:
            return state.g_running[f.label]
        hist = state.histogram
    if hist is None:
        raise ValueError("histogram snapshot not available for replay")
    return math.fsum(f.value(j) * q for j, q in sorted(hist.items()))


def functional_L(state, alpha: float) -> float:
    """L_n(alpha) = sum of alpha-th powers of positive local times."""
    if alpha < 0:
        raise NegativeAlpha(f"alpha must be >= 0, got {alpha}")
    hist = state.histogram
    if hist is None:
        raise ValueError("histogram snapshot not available")
    return math.fsum(float(j) ** alpha * q for j, q in sorted(hist.items()))
