"""Command-line entry points: simulate, exact, verify, gamma.

All numeric CSV cells use the shortest round-trip decimal (Python
``repr``), so identical configs and seeds reproduce byte-identical
files.  Exit codes: 0 success / all checks hold, 1 verification
failure, 2 configuration error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.special import zeta as _zeta

from . import __version__, exact, experiments
from .config import LoadedConfig, load_config
from .errors import ConfigParse, LtwalkError, MemoryCapExceeded
from .kernel import BACKEND
from .local_times import ObservableF

_MB = 1 << 20


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        loaded = load_config(args.config)
        cfg = loaded.experiment
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        mem_cap = args.mem_cap * _MB if args.mem_cap else exact.DEFAULT_MEM_CAP
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = _Manifest(loaded, cfg.seed, out_dir)
        if args.command == "simulate":
            rc = _cmd_simulate(cfg, out_dir, manifest)
        elif args.command == "exact":
            rc = _cmd_exact(cfg, loaded, out_dir, manifest, mem_cap)
        elif args.command == "verify":
            rc = _cmd_verify(cfg, args.suite, out_dir, manifest)
        else:
            rc = _cmd_gamma(cfg, loaded, out_dir, manifest, args.mc)
        manifest.write()
        return rc
    except ConfigParse as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except MemoryCapExceeded as e:
        print(f"resource cap: {e}", file=sys.stderr)
        return 3
    except LtwalkError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="experiment config (TOML)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for replicas")
    common.add_argument("--mem-cap", type=int, default=None, metavar="MB",
                        help="memory cap for exact computations")
    common.add_argument("--out-dir", default="ltwalk-out",
                        help="output directory (default ltwalk-out)")
    p = argparse.ArgumentParser(prog="ltwalk", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common],
                   help="run replicated walks, emit checkpoint CSV")
    sub.add_parser("exact", parents=[common],
                   help="emit return series, EQ table and limit constants")
    v = sub.add_parser("verify", parents=[common],
                       help="run a verification suite, emit certificates")
    v.add_argument("--suite", required=True,
                   choices=["slln", "variance", "maxlocal", "conditions", "subsequence"])
    g = sub.add_parser("gamma", parents=[common],
                       help="escape-probability estimates (series and MC)")
    g.add_argument("--mc", action="store_true", help="add the Monte Carlo estimate")
    return p


class _Manifest:
    def __init__(self, loaded: LoadedConfig, seed: int, out_dir: Path):
        self.out_dir = out_dir
        self.data = {
            "tool": "ltwalk",
            "version": __version__,
            "backend": BACKEND,
            "config_digest": loaded.digest,
            "seed": seed,
            "started": _now(),
            "outputs": [],
        }

    def add(self, path: Path):
        self.data["outputs"].append(path.name)

    def write(self):
        self.data["finished"] = _now()
        path = self.out_dir / "run_manifest.json"
        path.write_text(json.dumps(self.data, indent=2) + "\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows, manifest: _Manifest):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    manifest.add(path)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(cfg, out_dir: Path, manifest: _Manifest) -> int:
    batch = experiments.run_replicas(cfg)
    g_cols = {f.label: batch.functional(f) for f in cfg.observables}
    l_cols = {a: batch.functional_alpha(a) for a in cfg.alphas}
    header = ["replica", "n", "range", "l_max"]
    header += [f"G_{label}_over_n" for label in g_cols]
    header += [f"L_{_alpha_tag(a)}_over_n" for a in l_cols]
    ranges = batch.ranges()
    lmax = batch.l_max()
    rows = []
    for r in range(batch.replicas):
        for j, n in enumerate(batch.checkpoints):
            row = [r, n, int(ranges[r, j]), int(lmax[r, j])]
            row += [g_cols[label][r, j] / n for label in g_cols]
            row += [l_cols[a][r, j] / n for a in l_cols]
            rows.append(row)
    _write_csv(out_dir / "checkpoints.csv", header, rows, manifest)
    return 0


def _alpha_tag(a: float) -> str:
    return str(int(a)) if float(a).is_integer() else repr(float(a))


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------

def _cmd_exact(cfg, loaded: LoadedConfig, out_dir: Path, manifest: _Manifest,
               mem_cap: int) -> int:
    horizon = loaded.exact_horizon or 256
    series = exact.return_series(cfg.dist, horizon, mem_cap=mem_cap)
    rows = [(n, series.u[n], series.f_tau[n], series.gamma_n[n])
            for n in range(horizon + 1)]
    _write_csv(out_dir / "series.csv", ["n", "u", "f_tau", "gamma_n"], rows, manifest)

    table = exact.build_eq_table(series=series)
    eq_rows = []
    for n in range(horizon + 1):
        for j in range(1, table.j_max + 1):
            val = table.eq[n, j]
            if val > 0.0:
                eq_rows.append((n, j, val))
    _write_csv(out_dir / "eq_table.csv", ["n", "j", "EQ"], eq_rows, manifest)

    gamma = cfg.gamma if cfg.gamma is not None else series.gamma_estimate
    observables = list(cfg.observables) + [ObservableF.power(a) for a in cfg.alphas]
    seen = set()
    lim_rows = []
    for f in observables:
        if f.label in seen:
            continue
        seen.add(f.label)
        value, rem = exact.limit_constant_detail(f, gamma)
        lim_rows.append((f.label, value, rem))
    _write_csv(out_dir / "limits.csv", ["observable", "limit", "truncation_tol"],
               lim_rows, manifest)
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _cmd_verify(cfg, suite: str, out_dir: Path, manifest: _Manifest) -> int:
    rows = []
    if suite == "slln":
        rows = _verify_slln(cfg)
    elif suite == "variance":
        rows = _verify_variance(cfg)
    elif suite == "maxlocal":
        rows = _verify_maxlocal(cfg)
    elif suite == "conditions":
        rows = _verify_conditions(cfg)
    else:
        rows = _verify_subsequence(cfg)
    header = ["suite", "name", "observed", "reference", "verdict"]
    _write_csv(out_dir / "certificates.csv", header, rows, manifest)
    return 0 if all(r[-1] == "Holds" for r in rows) else 1


def _verify_slln(cfg):
    params = cfg.verify.get("slln", {})
    tolerances = params.get("tolerances", {})
    report = experiments.run_slln(cfg)
    rows = []
    for f in cfg.observables:
        last = report.by_observable(f.label)[-1]
        dev = abs(last.mean - last.limit)
        se = (last.variance / cfg.replicas) ** 0.5
        tol = tolerances.get(f.label, max(4.0 * se, 1e-12))
        rows.append(("slln", f"{f.label}@n={last.n}", dev, tol,
                     "Holds" if dev <= tol else "Fails"))
    return rows


def _verify_variance(cfg):
    params = cfg.verify.get("variance", {})
    checkpoints = params.get("checkpoints")
    labels = params.get("observables")
    rows = []
    for f in cfg.observables:
        if labels is not None and f.label not in labels:
            continue
        if not f.is_nondecreasing():
            continue
        cert = experiments.verify_variance(cfg, f, checkpoints=checkpoints)
        for ev in cert.evidence:
            rows.append(("variance", f"{f.label}@n={ev['n']}", ev["ci_low"],
                         ev["bound"], "Holds" if ev["bound"] >= ev["ci_low"] else "Fails"))
    return rows


def _verify_maxlocal(cfg):
    params = cfg.verify.get("maxlocal", {})
    eps = float(params.get("eps", 0.5))
    m = int(params.get("m", 1))
    max_violation = float(params.get("max_violation", 0.05))
    report = experiments.run_maxlocal(cfg, eps=eps, m=m)
    rows = []
    for ck in report.checkpoints:
        for tr in ck.tail_rows:
            rows.append(("maxlocal", f"tail@n={ck.n},t={tr['t']}", tr["empirical"],
                         tr["bound"] + 3 * tr["se"],
                         "Holds" if tr["ok"] else "Fails"))
        rows.append(("maxlocal", f"proposition@n={ck.n}", ck.violation_fraction,
                     max_violation,
                     "Holds" if ck.violation_fraction <= max_violation else "Fails"))
    return rows


def _verify_conditions(cfg):
    params = cfg.verify.get("conditions", {})
    mode = params.get("mode", "log")
    eta = params.get("eta")
    grid = params.get("grid", [250, 500, 1000, 2000])
    u = exact.compute_u_series(cfg.dist, max(grid))
    cert = exact.condition_check(u, mode, grid, eta=eta)
    verdict = "Holds" if cert.holds else "Fails"
    return [("conditions", f"{cert.name}[{mode}]", cert.params["growth"],
             cert.params["growth_limit"], verdict)]


def _verify_subsequence(cfg):
    params = cfg.verify.get("subsequence", {})
    deltas = params.get("delta", [0.5, 1.0, 2.0])
    blocks = int(params.get("blocks", 50))
    rows = []
    for delta in deltas:
        plan = experiments.build_subsequence(
            lambda n: 1.0 / (n * n), delta, blocks=blocks, strictly_decreasing=True)
        evidence = float(_zeta(3.0, 1.0)) / plan.log_b
        increasing = all(b >= a for a, b in zip(plan.partial_sums, plan.partial_sums[1:]))
        ok = plan.ratios_ok and increasing and plan.partial_sums[-1] <= evidence
        rows.append(("subsequence", f"delta={delta}", plan.partial_sums[-1],
                     evidence, "Holds" if ok else "Fails"))
    return rows


# ---------------------------------------------------------------------------
# gamma
# ---------------------------------------------------------------------------

def _cmd_gamma(cfg, loaded: LoadedConfig, out_dir: Path, manifest: _Manifest,
               mc: bool) -> int:
    horizon = loaded.exact_horizon or 256
    series = exact.return_series(cfg.dist, horizon)
    s = series.summary
    rows = [("series", horizon, s.gamma_estimate,
             max(s.gamma_estimate - s.error_bound, 0.0), s.gamma_upper,
             s.recurrent, s.trivial_transient)]
    if mc or "gamma_mc" in cfg.verify:
        params = cfg.verify.get("gamma_mc", {})
        mc_horizon = int(params.get("horizon", horizon))
        est = experiments.estimate_gamma_mc(cfg, mc_horizon)
        rows.append(("mc", est.horizon, est.gamma_hat, est.ci_low, est.ci_high,
                     False, False))
    header = ["method", "horizon", "estimate", "lo", "hi",
              "recurrent", "trivial_transient"]
    _write_csv(out_dir / "gamma.csv", header, rows, manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
