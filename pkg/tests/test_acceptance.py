"""End-to-end acceptance suite.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them
on success).  The statistical criteria run at fixed seeds, so the whole
suite is deterministic; the heavier runs are shared through module
fixtures.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from ltwalk import cli, exact, experiments, kernel, walks
from ltwalk.experiments import ExperimentConfig
from ltwalk.local_times import ObservableF

SEED = 20250810
POW2_CHECKPOINTS = [2**k for k in range(10, 18)]


def announce(num: int, name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"ACCEPTANCE {num:02d} {name}: {tag}{suffix}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


@pytest.fixture(scope="module")
def biased():
    return walks.preset("biased1d", p=Fraction(2, 3))


@pytest.fixture(scope="module")
def slln_run(biased):
    cks = sorted({1000, 100_000, *POW2_CHECKPOINTS})
    cfg = ExperimentConfig(
        dist=biased,
        observables=(ObservableF.power(0), ObservableF.power(2),
                     ObservableF.indicator([1])),
        replicas=200,
        n_max=131_072,
        checkpoints=tuple(cks),
        seed=SEED,
        gamma=1 / 3,
    )
    t0 = time.time()
    batch = experiments.run_replicas(cfg)
    elapsed = time.time() - t0
    return cfg, batch, elapsed


@pytest.fixture(scope="module")
def variance_run(biased):
    cfg = ExperimentConfig(
        dist=biased,
        replicas=500,
        n_max=10_000,
        checkpoints=(100, 1000, 10_000),
        seed=SEED + 1,
        gamma=1 / 3,
    )
    return cfg, experiments.run_replicas(cfg)


@pytest.fixture(scope="module")
def simple3_series():
    return exact.return_series(walks.preset("simple", d=3), 10_000)


def test_01_conservation_identities(slln_run, variance_run):
    """Sum j*Q_n(j) = n+1 and sum Q_n(j) = range on every trajectory."""
    ok = True
    batches = [slln_run[1], variance_run[1]]
    cfg = ExperimentConfig(dist=walks.preset("simple", d=3), replicas=8,
                           n_max=4096, seed=SEED)
    batches.append(experiments.run_replicas(cfg))
    cells = 0
    for batch in batches:
        for row in batch.snapshots:
            for snap in row:
                cells += 1
                ok = ok and int((snap.js * snap.qs).sum()) == snap.n + 1
                ok = ok and int(snap.qs.sum()) == snap.range
    announce(1, "conservation-identities", ok, f"{cells} trajectory checkpoints")


def test_02_trivial_channel(slln_run, variance_run):
    """L_n(1) = n + 1 exactly for every trajectory and checkpoint."""
    ok = True
    for _, batch, *_ in (slln_run, variance_run):
        g1 = batch.functional_alpha(1.0)
        for j, n in enumerate(batch.checkpoints):
            ok = ok and bool((g1[:, j] == n + 1).all())
    announce(2, "trivial-channel-L1", ok)


def test_03_oracle_equivalence(biased):
    """Renewal-representation EQ matches exhaustive path enumeration."""
    t0 = time.time()
    series = exact.return_series(biased, 12)
    ok = True
    worst = 0.0
    for n in range(1, 13):
        oracle = experiments.exhaustive_eq(biased, n)
        for j in range(1, n + 2):
            want = float(oracle.get(j, Fraction(0)))
            got = exact.exact_EQ(series.f_tau, series.gamma_n, n, j)
            worst = max(worst, abs(got - want))
            ok = ok and abs(got - want) <= 1e-12
    table = exact.build_eq_table(biased, 2)
    ok = ok and abs(table.expected_Q(2, 1) - 19 / 9) <= 1e-12
    ok = ok and abs(table.expected_Q(2, 2) - 4 / 9) <= 1e-12
    elapsed = time.time() - t0
    ok = ok and elapsed < 10.0
    announce(3, "oracle-equivalence", ok,
             f"max |diff| = {worst:.2e}, {elapsed:.1f}s")


def test_04_renewal_round_trip():
    """Reconvolving f_tau against u reproduces u to 1e-12 at N=512."""
    worst = 0.0
    for name, kwargs in [("biased1d", {"p": Fraction(2, 3)}),
                         ("simple", {"d": 1}), ("simple", {"d": 3})]:
        dist = walks.preset(name, **kwargs)
        u = exact.compute_u_series(dist, 512)
        residual = exact.renewal_residual(u, exact.first_return_series(u))
        worst = max(worst, residual)
    announce(4, "renewal-round-trip", worst <= 1e-12, f"max residual {worst:.2e}")


def test_05_gamma_recovery(biased, simple3_series):
    """Series estimate hits the closed form; MC interval brackets the
    series estimate for the 3-d simple walk."""
    s200 = exact.return_series(biased, 200)
    err = abs(s200.gamma_estimate - 1 / 3)
    ok = err <= 1e-6
    cfg = ExperimentConfig(dist=walks.preset("simple", d=3), replicas=10_000,
                           n_max=1, seed=SEED)
    est = experiments.estimate_gamma_mc(cfg, horizon=10_000)
    series_est = simple3_series.gamma_estimate
    ok = ok and est.ci_low <= series_est <= est.ci_high
    ok = ok and abs(series_est - 0.6595) < 5e-4
    announce(5, "gamma-recovery", ok,
             f"biased err {err:.1e}; simple3 {series_est:.5f} in "
             f"[{est.ci_low:.5f}, {est.ci_high:.5f}]")


def test_06_slln_desk_scale(slln_run):
    """Replica means land on the limit constants at n = 1e5, and the
    mean-square distance shrinks along the dyadic schedule (one reversal
    allowed); the mean deviation itself must shrink net over the range."""
    cfg, batch, elapsed = slln_run
    report = experiments.run_slln(cfg, batch=batch)
    tolerances = {"power_0": 0.01, "power_2": 0.02 * 5.0, "ind_1": 0.05 / 9}
    ok = True
    details = []
    for label, tol in tolerances.items():
        rows = report.by_observable(label)
        at_top = next(r for r in rows if r.n == 100_000)
        dev = abs(at_top.mean - at_top.limit)
        details.append(f"{label} dev {dev:.1e} (tol {tol:.1e})")
        ok = ok and dev <= tol
        dyadic = [r for r in rows if r.n in set(POW2_CHECKPOINTS)]
        l2 = [r.l2_distance for r in dyadic]
        reversals = sum(1 for a, b in zip(l2, l2[1:]) if b > a)
        ok = ok and reversals <= 1
        mean_devs = [abs(r.mean - r.limit) for r in dyadic]
        ok = ok and mean_devs[-1] < mean_devs[0]
    if kernel.BACKEND == "compiled":
        ok = ok and elapsed < 60.0
    announce(6, "slln-desk-scale", ok,
             "; ".join(details) + f"; run {elapsed:.1f}s")


def test_07_l2_trend(slln_run):
    """Replica variance of G_n(f)/n at n=1e5 sits below its n=1e3 value."""
    cfg, batch, _ = slln_run
    report = experiments.run_slln(cfg, batch=batch)
    ok = True
    details = []
    for label in ("power_0", "power_2"):
        rows = report.by_observable(label)
        v_lo = next(r.variance for r in rows if r.n == 1000)
        v_hi = next(r.variance for r in rows if r.n == 100_000)
        details.append(f"{label}: {v_lo:.2e} -> {v_hi:.2e}")
        ok = ok and v_hi < v_lo
    announce(7, "l2-variance-trend", ok, "; ".join(details))


def test_08_variance_bound(biased, variance_run):
    """Lemma-style bound dominates the lower 99% confidence limit of the
    empirical variance; the n=2 range case is checked by enumeration."""
    cfg, batch = variance_run
    ok = True
    details = []
    for f in (ObservableF.indicator_at_least(1), ObservableF.power(2)):
        cert = experiments.verify_variance(cfg, f, batch=batch)
        ok = ok and cert.holds
        margin = min(row["bound"] / row["ci_low"] for row in cert.evidence)
        details.append(f"{f.label} x{margin:.0f}")
    series = exact.return_series(biased, 8)
    bound2 = exact.variance_bound(ObservableF.indicator_at_least(1), 2,
                                  series.u, 1 / 3, dist=biased)
    _, var2 = experiments.exhaustive_moments(biased, 2,
                                             ObservableF.indicator_at_least(1))
    ok = ok and var2 == Fraction(20, 81) and float(var2) <= bound2
    ok = ok and abs(bound2 - 23 / 9) <= 1e-12
    announce(8, "variance-bound", ok,
             f"min bound/CI margins: {', '.join(details)}; "
             f"n=2 exact 20/81 <= 23/9")


def test_09_max_local_time(slln_run):
    """Exceedance frequencies respect the geometric tail bound, and the
    iterated-log envelope is violated by at most 5% of replicas."""
    cfg, batch, _ = slln_run
    report = experiments.run_maxlocal(cfg, eps=0.5, m=1, batch=batch)
    top = next(c for c in report.checkpoints if c.n == 100_000)
    ok = report.all_tail_ok and top.violation_fraction <= 0.05
    announce(9, "max-local-time", ok,
             f"prop bound {top.proposition_bound:.2f}, violations "
             f"{top.violation_fraction:.3f}, tail rows all ok: {report.all_tail_ok}")


def test_10_subsequence_construction():
    """Block-argmin subsequence: ratio invariants hold for every emitted
    index and the partial sums stay below the series evidence value."""
    ok = True
    details = []
    zeta3 = float(np.sum(1.0 / np.arange(1, 2_000_000, dtype=np.float64) ** 3))
    for delta in (0.5, 1.0, 2.0):
        plan = experiments.build_subsequence(lambda n: 1.0 / (n * n), delta,
                                             blocks=50, strictly_decreasing=True)
        ok = ok and len(plan.n_r) == 50 and plan.ratios_ok
        one_plus = 1 + Fraction(delta)
        for i in range(1, 49):
            ok = ok and Fraction(plan.n_r[i + 1]) ** 2 >= one_plus * plan.n_r[i - 1] ** 2
            ok = ok and plan.n_r[i + 1] <= one_plus * plan.n_r[i]
        # increasing: every increment is positive and the float partial
        # sums never step down
        sums = plan.partial_sums
        ok = ok and all(v > 0 for v in plan.v_r)
        ok = ok and all(b2 >= a2 for a2, b2 in zip(sums, sums[1:]))
        evidence = zeta3 / plan.log_b
        ok = ok and sums[-1] <= evidence
        details.append(f"d={delta}: sum {sums[-1]:.3f} <= {evidence:.2f}")
    announce(10, "subsequence-construction", ok, "; ".join(details))


def test_11_condition_discrimination(biased):
    """Partial-sum growth check separates the transient laws from the
    recurrent planar walk on a grid up to 2000."""
    grid = [250, 500, 1000, 2000]
    verdicts = {}
    for tag, dist in [("biased1d", biased),
                      ("simple3", walks.preset("simple", d=3)),
                      ("simple2", walks.preset("simple", d=2))]:
        u = exact.compute_u_series(dist, 2000)
        verdicts[tag] = exact.condition_check(u, "log", grid).holds
    ok = verdicts["biased1d"] and verdicts["simple3"] and not verdicts["simple2"]
    announce(11, "condition-discrimination", ok, str(verdicts))


def test_12_reproducibility(tmp_path):
    """Identical config and seed give byte-identical CSV outputs."""
    conf = tmp_path / "repro.toml"
    conf.write_text("""\
schema = 1

[distribution]
preset = "biased1d"
p = [2, 3]

[run]
replicas = 3
n_max = 64
seed = 99
alphas = [0.0, 1.0, 2.0]

[[observables]]
form = "power"
alpha = 0.0

[[observables]]
form = "indicator"
min = 1
""")
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert cli.main(["simulate", str(conf), "--out-dir", str(out)]) == 0
        outs.append((out / "checkpoints.csv").read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    announce(12, "reproducibility", ok, f"{len(outs[0])} bytes")
