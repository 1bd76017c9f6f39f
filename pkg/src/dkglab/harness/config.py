"""Run configuration: presets, TOML files, overrides, validation, provenance hash.

Effective values are resolved with the precedence flag > file > preset default.
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..evolver import DT_MAX, FAMILIES, InitialDataSpec

PRESETS = ("identities", "free-decay", "dkg-small", "convergence")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


BASE: dict[str, Any] = {
    "preset": "dkg-small",
    "seed": 0,
    "out": "runs/dkg-small",
    "grid": {"n": 512, "L": 80.0},
    "integrator": {"dt": 0.01, "T": 60.0, "sample_every": 100, "dealias": True},
    "data": {
        "family": "gaussian",
        "eps": 0.01,
        "sigma": 2.0,
        "center": [0.0, 0.0],
        "polarization_re": [1.0, 0.0],
        "polarization_im": [0.0, 0.0],
        "kg_amplitude": 1.0,
        "kg_velocity": 0.0,
        "kg_sigma": 2.0,
        "ring_radius": 3.0,
        "wavevector": [1.0, 0.0],
        "aux": True,
    },
    "diagnostics": {
        "energies": True,
        "transforms": True,
        "transform_every": 10.0,
        "scattering": True,
        "scatter_every": 5.0,
        "scatter_from": 10.0,
        "structure": True,
        "fit_window": [10.0, 60.0],
        "snapshot_every": 0.0,
        "figures": True,
        "trials": 1000,
        "convergence_dts": [0.04, 0.02, 0.01, 0.005],
        "convergence_t": 5.0,
    },
    "exponents": {"delta": 0.05, "delta1": 0.15},
}

PRESET_OVERRIDES: dict[str, dict[str, Any]] = {
    "dkg-small": {},
    "identities": {"out": "runs/identities"},
    "free-decay": {
        "out": "runs/free-decay",
        "grid": {"n": 1024, "L": 120.0},
        "integrator": {"dt": 0.1, "T": 100.0, "sample_every": 20},
        "data": {"eps": 1.0, "sigma": 1.5, "kg_sigma": 1.5, "aux": False},
        "diagnostics": {"fit_window": [20.0, 100.0], "energies": False, "transforms": False,
                        "scattering": False, "structure": False},
    },
    "convergence": {
        "out": "runs/convergence",
        "integrator": {"T": 5.0},
        "diagnostics": {"energies": False, "scattering": False, "structure": False},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset_defaults(preset: str) -> dict:
    if preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r}; expected one of {PRESETS}")
    return _merge(_merge(BASE, {"preset": preset}), PRESET_OVERRIDES[preset])


def parse_toml(text: str, source: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        where = f" at line {line}, column {col}" if line is not None else ""
        raise ConfigError("file", f"cannot parse {source}{where}: {getattr(exc, 'msg', exc)}") from exc


def _check_known(raw: dict, schema: dict, prefix: str = "") -> None:
    for k, v in raw.items():
        name = f"{prefix}{k}"
        if k not in schema:
            raise ConfigError(name, "unknown key")
        if isinstance(schema[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(name, "expected a section")
            _check_known(v, schema[k], name + ".")


def parse_value(text: str) -> Any:
    """Interpret an override value with TOML literal syntax; bare words become strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(dotted, "unknown key")
        node = node[p]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ConfigError(dotted, "unknown key")
    node[parts[-1]] = value


def resolve(file_cfg: dict | None = None, overrides: dict[str, Any] | None = None, preset: str | None = None) -> dict:
    """Merge preset defaults, file values and flag overrides, then validate."""
    file_cfg = file_cfg or {}
    overrides = dict(overrides or {})
    name = overrides.pop("preset", None) or preset or file_cfg.get("preset") or BASE["preset"]
    cfg = preset_defaults(name)
    _check_known(file_cfg, cfg)
    cfg = _merge(cfg, file_cfg)
    cfg["preset"] = name
    for k, v in overrides.items():
        apply_override(cfg, k, v)
    validate(cfg)
    return cfg


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None, preset: str | None = None) -> dict:
    file_cfg = {}
    if path is not None:
        p = Path(path)
        file_cfg = parse_toml(p.read_text(encoding="utf-8"), str(p))
    return resolve(file_cfg, overrides, preset)


# ----------------------------------------------------------------- validation


def _num(cfg, section, key, *, positive=False, integer=False, nonneg=False):
    v = cfg[section][key]
    name = f"{section}.{key}"
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if v != v or v in (float("inf"), float("-inf")):
        raise ConfigError(name, "must be finite")
    if positive and v <= 0:
        raise ConfigError(name, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(name, f"must be nonnegative, got {v!r}")
    return v


def _pair(cfg, section, key):
    v = cfg[section][key]
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise ConfigError(f"{section}.{key}", f"expected a list of two numbers, got {v!r}")
    return v


def _flag(cfg, section, key):
    if not isinstance(cfg[section][key], bool):
        raise ConfigError(f"{section}.{key}", f"expected true or false, got {cfg[section][key]!r}")


def validate(cfg: dict) -> None:
    if not isinstance(cfg.get("seed"), int) or isinstance(cfg.get("seed"), bool) or cfg["seed"] < 0:
        raise ConfigError("seed", f"expected a nonnegative integer, got {cfg.get('seed')!r}")
    if not isinstance(cfg.get("out"), str) or not cfg["out"]:
        raise ConfigError("out", "expected a nonempty path")

    n = _num(cfg, "grid", "n", integer=True, positive=True)
    if n < 16 or int(n) & (int(n) - 1):
        raise ConfigError("grid.n", f"must be a power of two >= 16, got {n!r}")
    cfg["grid"]["n"] = int(n)
    _num(cfg, "grid", "L", positive=True)

    dt = _num(cfg, "integrator", "dt", positive=True)
    if dt > DT_MAX:
        raise ConfigError("integrator.dt", f"must be <= dt_max = {DT_MAX}, got {dt!r}")
    T = _num(cfg, "integrator", "T", nonneg=True)
    se = _num(cfg, "integrator", "sample_every", integer=True, positive=True)
    cfg["integrator"]["sample_every"] = int(se)
    steps = T / dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError("integrator.T", f"must be a multiple of integrator.dt = {dt}")
    _flag(cfg, "integrator", "dealias")

    d = cfg["data"]
    if d["family"] not in FAMILIES:
        raise ConfigError("data.family", f"must be one of {FAMILIES}, got {d['family']!r}")
    _num(cfg, "data", "eps", nonneg=True)
    _num(cfg, "data", "sigma", positive=True)
    _num(cfg, "data", "kg_sigma", positive=True)
    _num(cfg, "data", "ring_radius", nonneg=True)
    for k in ("kg_amplitude", "kg_velocity"):
        _num(cfg, "data", k)
    for k in ("center", "polarization_re", "polarization_im", "wavevector"):
        _pair(cfg, "data", k)
    if not any(d["polarization_re"]) and not any(d["polarization_im"]):
        raise ConfigError("data.polarization_re", "polarization must be nonzero")
    _flag(cfg, "data", "aux")
    spec = data_spec(cfg)
    if spec.support_radius() > cfg["grid"]["L"] / 4:
        raise ConfigError(
            "data.sigma", f"data support radius {spec.support_radius():.4g} exceeds grid.L / 4 = {cfg['grid']['L'] / 4:.4g}"
        )

    dg = cfg["diagnostics"]
    for k in ("energies", "transforms", "scattering", "structure", "figures"):
        _flag(cfg, "diagnostics", k)
    for k in ("transform_every", "scatter_every"):
        _num(cfg, "diagnostics", k, positive=True)
    _num(cfg, "diagnostics", "scatter_from", nonneg=True)
    _num(cfg, "diagnostics", "snapshot_every", nonneg=True)
    _num(cfg, "diagnostics", "convergence_t", positive=True)
    _num(cfg, "diagnostics", "trials", integer=True, positive=True)
    w = _pair(cfg, "diagnostics", "fit_window")
    if not 0 < w[0] < w[1]:
        raise ConfigError("diagnostics.fit_window", f"must satisfy 0 < t0 < t1, got {w!r}")
    from ..analysis.fits import WRAP_FRACTION, wrap_time

    t_wrap = wrap_time(cfg["grid"]["L"], spec.support_radius())
    if w[1] > WRAP_FRACTION * t_wrap + 1e-12:
        raise ConfigError(
            "diagnostics.fit_window", f"end {w[1]} exceeds {WRAP_FRACTION} * t_wrap = {WRAP_FRACTION * t_wrap:.4g}"
        )
    dts = dg["convergence_dts"]
    if not (isinstance(dts, list) and len(dts) >= 2 and all(isinstance(x, (int, float)) and 0 < x <= DT_MAX for x in dts)):
        raise ConfigError("diagnostics.convergence_dts", f"expected at least two step sizes in (0, {DT_MAX}]")
    for x in dts:
        k = dg["convergence_t"] / x
        if abs(k - round(k)) > 1e-9 * k:
            raise ConfigError("diagnostics.convergence_dts", f"{x} does not divide diagnostics.convergence_t")

    delta = _num(cfg, "exponents", "delta", positive=True)
    delta1 = _num(cfg, "exponents", "delta1", positive=True)
    if delta >= 1 or delta1 >= 1:
        raise ConfigError("exponents.delta", "exponents must be small, below 1")


def data_spec(cfg: dict) -> InitialDataSpec:
    d = cfg["data"]
    pol = tuple(complex(a, b) for a, b in zip(d["polarization_re"], d["polarization_im"]))
    return InitialDataSpec(
        family=d["family"],
        eps=float(d["eps"]),
        sigma=float(d["sigma"]),
        center=tuple(map(float, d["center"])),
        polarization=pol,
        kg_amplitude=float(d["kg_amplitude"]),
        kg_velocity=float(d["kg_velocity"]),
        kg_sigma=float(d["kg_sigma"]),
        ring_radius=float(d["ring_radius"]),
        wavevector=tuple(map(float, d["wavevector"])),
        seed=int(cfg["seed"]),
        aux=bool(d["aux"]),
    )


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def to_toml(cfg: dict) -> str:
    """Render a resolved config as TOML (the echo written next to the outputs)."""

    def lit(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, list):
            return "[" + ", ".join(lit(x) for x in v) + "]"
        return repr(float(v)) if isinstance(v, float) else str(v)

    lines = [f"{k} = {lit(v)}" for k, v in cfg.items() if not isinstance(v, dict)]
    for k, v in cfg.items():
        if isinstance(v, dict):
            lines.append(f"\n[{k}]")
            lines += [f"{kk} = {lit(vv)}" for kk, vv in v.items()]
    return "\n".join(lines) + "\n"
