"""TOML experiment configuration: parsing, validation, digesting.

The schema is versioned through a top-level ``schema`` key.  Rational
probabilities are written as two-integer arrays ``[num, den]`` so that
configs stay diff-able and exact.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigParse, LtwalkError
from .experiments import ExperimentConfig
from .local_times import ObservableF
from .walks import StepDistribution, preset

SCHEMA_VERSION = 1


@dataclass
class LoadedConfig:
    experiment: ExperimentConfig
    digest: str          # 64-bit hex digest of the config bytes
    raw: bytes
    exact_horizon: int
    exact_rational: bool


def config_digest(raw: bytes) -> str:
    return hashlib.blake2b(raw, digest_size=8).hexdigest()


def load_config(path: str | Path) -> LoadedConfig:
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigParse(f"cannot parse {path}: {e}") from e
    return parse_config(doc, raw)


def parse_config(doc: dict, raw: bytes = b"") -> LoadedConfig:
    schema = doc.get("schema")
    if schema != SCHEMA_VERSION:
        raise ConfigParse(f"schema: expected {SCHEMA_VERSION}, got {schema!r}")
    dist = _parse_distribution(_need(doc, "distribution", dict))
    run = _need(doc, "run", dict)
    observables = tuple(
        _parse_observable(tbl, i) for i, tbl in enumerate(doc.get("observables", []))
    )
    alphas = tuple(_num(a, f"run.alphas[{i}]") for i, a in enumerate(run.get("alphas", [])))
    for i, a in enumerate(alphas):
        if a < 0:
            raise ConfigParse(f"run.alphas[{i}]: alpha must be >= 0, got {a}")
    verify = doc.get("verify", {})
    gamma_pin = verify.get("gamma")
    if gamma_pin is not None:
        gamma_pin = float(_rational_or_float(gamma_pin, "verify.gamma"))
        if not 0.0 < gamma_pin <= 1.0:
            raise ConfigParse(f"verify.gamma: must be in (0,1], got {gamma_pin}")
    exact_tbl = doc.get("exact", {})
    try:
        experiment = ExperimentConfig(
            dist=dist,
            observables=observables,
            alphas=alphas,
            replicas=_int_field(run, "replicas", "run.replicas", default=1, low=1),
            n_max=_int_field(run, "n_max", "run.n_max", default=1, low=1),
            checkpoint_start=_int_field(run, "checkpoint_start", "run.checkpoint_start",
                                        default=1, low=1),
            checkpoint_ratio=float(run.get("checkpoint_ratio", 2.0)),
            checkpoints=tuple(run["checkpoints"]) if "checkpoints" in run else None,
            seed=_int_field(run, "seed", "run.seed", default=0, low=None),
            gamma=gamma_pin,
            exact_horizon=_int_field(exact_tbl, "horizon", "exact.horizon",
                                     default=0, low=0),
            threads=_int_field(run, "threads", "run.threads", default=1, low=1),
            override_transience_check=bool(verify.get("override_transience", False)),
            verify=dict(verify),
        )
    except LtwalkError as e:
        raise ConfigParse(f"run: {e}") from e
    return LoadedConfig(
        experiment=experiment,
        digest=config_digest(raw),
        raw=raw,
        exact_horizon=experiment.exact_horizon,
        exact_rational=bool(exact_tbl.get("rational", False)),
    )


def _need(doc: dict, key: str, kind) -> dict:
    val = doc.get(key)
    if not isinstance(val, kind):
        raise ConfigParse(f"{key}: required {kind.__name__} section missing")
    return val


def _int_field(tbl: dict, key: str, field: str, default: int, low: int | None) -> int:
    val = tbl.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool):
        raise ConfigParse(f"{field}: expected integer, got {val!r}")
    if low is not None and val < low:
        raise ConfigParse(f"{field}: must be >= {low}, got {val}")
    return val


def _num(val, field: str) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigParse(f"{field}: expected number, got {val!r}")
    return float(val)


def _rational_or_float(val, field: str):
    """[num, den] arrays become Fractions; plain numbers pass through."""
    if isinstance(val, list):
        if len(val) != 2 or not all(isinstance(x, int) for x in val):
            raise ConfigParse(f"{field}: rational must be [num, den] integers")
        if val[1] == 0:
            raise ConfigParse(f"{field}: zero denominator")
        return Fraction(val[0], val[1])
    return _num(val, field)


def _parse_distribution(tbl: dict) -> StepDistribution:
    name = tbl.get("preset")
    try:
        if name == "simple":
            return preset("simple", d=_int_field(tbl, "d", "distribution.d", 1, 1))
        if name == "biased1d":
            if "p" not in tbl:
                raise ConfigParse("distribution.p: required for biased1d")
            return preset("biased1d", p=_rational_or_float(tbl["p"], "distribution.p"))
        if name == "custom":
            atoms_tbl = tbl.get("atoms")
            if not atoms_tbl:
                raise ConfigParse("distribution.atoms: required for custom preset")
            d = _int_field(tbl, "d", "distribution.d", 0, 1)
            atoms = []
            for i, atom in enumerate(atoms_tbl):
                site = atom.get("site")
                if not isinstance(site, list):
                    raise ConfigParse(f"distribution.atoms[{i}].site: expected list")
                prob = _rational_or_float(atom.get("prob"), f"distribution.atoms[{i}].prob")
                atoms.append((tuple(site), prob))
            return preset("custom", d=d, atoms=atoms)
    except ConfigParse:
        raise
    except LtwalkError as e:
        raise ConfigParse(f"distribution: {e}") from e
    raise ConfigParse(f"distribution.preset: unknown preset {name!r}")


def _parse_observable(tbl: dict, i: int) -> ObservableF:
    form = tbl.get("form")
    where = f"observables[{i}]"
    try:
        if form == "power":
            alpha = _num(tbl.get("alpha", 1.0), f"{where}.alpha")
            if alpha < 0:
                raise ConfigParse(f"{where}.alpha: must be >= 0, got {alpha}")
            return ObservableF.power(alpha)
        if form == "indicator":
            if "set" in tbl:
                return ObservableF.indicator(tbl["set"])
            if "min" in tbl:
                return ObservableF.indicator_at_least(
                    _int_field(tbl, "min", f"{where}.min", 1, 1))
            if "exclude" in tbl:
                return ObservableF.indicator_cofinite(tbl["exclude"])
            raise ConfigParse(f"{where}: indicator needs one of set/min/exclude")
        if form == "table":
            values = tbl.get("values")
            if not isinstance(values, list) or not values:
                raise ConfigParse(f"{where}.values: non-empty list required")
            return ObservableF.from_table(values, tbl.get("tail", "zero"))
        if form == "exp_capped":
            return ObservableF.exp_capped(_num(tbl.get("c"), f"{where}.c"),
                                          _num(tbl.get("p"), f"{where}.p"))
    except ConfigParse:
        raise
    except LtwalkError as e:
        raise ConfigParse(f"{where}: {e}") from e
    raise ConfigParse(f"{where}.form: unknown form {form!r}")
