"""Experiment configuration: schema, YAML loading, flag precedence.

Resolution order per key: built-in default, then the YAML file, then
command-line flags. The seed additionally falls back to ``TURBCLOUD_SEED``
when neither the file nor a flag sets it. Unknown keys and wrong types are
errors that name the key.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .rng import DEFAULT_SEED

REQUIRED = object()


@dataclass(frozen=True)
class Key:
    type: str           # int, float, bool, str, ints, opt_float
    default: object = None
    help: str = ""
    choices: tuple | None = None


_COMMON = {
    "seed": Key("int", DEFAULT_SEED, "master seed (64-bit unsigned)"),
    "out": Key("str", REQUIRED, "output table path"),
    "format": Key("str", "csv", "output format", ("csv", "tsv")),
    "workers": Key("int", None, "worker processes (default: available cores)"),
}

_SPECTRUM = {
    "u0": Key("float", 1.0, "velocity scale"),
    "k0": Key("float", 1.0, "wavenumber scale"),
    "epsilon": Key("opt_float", None, "dissipation rate (default u0^3 k0)"),
    "eta": Key("opt_float", None, "Kolmogorov length (default: calibrated to the energy target)"),
    "a_hunt": Key("float", 0.5, "frequency-width coefficient"),
    "n_modes": Key("int", 400, "number of modes"),
    "dim": Key("int", 3, "space dimension", (1, 2, 3)),
    "divergence_free": Key("bool", True, "project amplitudes orthogonal to wavevectors"),
}

SCHEMAS = {
    "field_sample": {**_SPECTRUM},
    "field_eval": {
        **_SPECTRUM,
        "modes": Key("str", None, "mode table to evaluate (default: sample a new field)"),
        "t": Key("float", 0.0, "evaluation time"),
        "grid_n": Key("int", 16, "grid points per axis"),
        "grid_length": Key("opt_float", None, "grid side (default 2 pi / k0)"),
    },
    "disperse": {
        **_SPECTRUM,
        "n_modes": Key("int", 16, "number of modes"),
        "dim": Key("int", 1, "space dimension", (1, 2, 3)),
        "particles": Key("int", 10_000, "particles in the cloud"),
        "tau_p": Key("float", 1.0, "particle relaxation time"),
        "dt": Key("float", 1e-3, "time step"),
        "t_end": Key("float", 100.0, "final time"),
        "output_every": Key("float", 0.1, "output cadence"),
        "init_velocity": Key("str", "zero", "initial particle velocity", ("zero", "fluid")),
        "box_length": Key("opt_float", None, "release box side (default 2 pi / k0)"),
        "tracks": Key("int", 0, "also write the first N particle tracks (at most 10)"),
    },
    "chaos": {
        "ns": Key("ints", [8, 16, 32, 64, 128, 256, 512], "ensemble sizes"),
        "reps": Key("int", 200, "repetitions per size"),
        "lambda": Key("float", 1.0, "alignment strength"),
        "sigma": Key("float", 0.5, "noise intensity"),
        "t_end": Key("float", 2.0, "final time"),
        "dt": Key("float", 1e-3, "time step"),
        "dim": Key("int", 1, "space dimension", (1, 2, 3)),
        "field": Key("str", "none", "external field", ("none", "uniform_drag_to")),
        "u_const": Key("float", 0.0, "target velocity of the uniform drag"),
        "drag_tau": Key("float", 1.0, "relaxation time of the uniform drag"),
    },
    "sine1d": {
        "a": Key("float", 1.0, "sine amplitude"),
        "omega": Key("float", 2.0, "frequency (cycles per unit time)"),
        "k": Key("float", 1.0, "wavenumber (cycles per unit length)"),
        "phi": Key("float", 0.0, "phase"),
        "tau_p": Key("float", 1.0, "relaxation time"),
        "x0": Key("float", 0.0, "initial position"),
        "c0": Key("float", 0.0, "initial velocity"),
        "dt": Key("float", 1e-3, "time step"),
        "t_end": Key("float", 200.0, "final time"),
        "output_every": Key("float", 0.01, "output cadence"),
        "transient": Key("float", 20.0, "time excluded from drift statistics"),
    },
    "burgers": {
        "mode": Key("str", "lagrangian", "scheme or study",
                    ("lagrangian", "eulerian", "homogeneous", "compare")),
        "np": Key("int", 64, "particles per realization"),
        "np_list": Key("ints", None, "particle counts for a sweep (overrides np)"),
        "cells": Key("int", 128, "grid cells"),
        "length": Key("float", 1.0, "domain length"),
        "rho_f": Key("float", 1.0, "gas density"),
        "kappa_m": Key("float", 1.0, "mean mass loading"),
        "tau_p": Key("float", 0.1, "particle relaxation time"),
        "u0_gas": Key("float", 1.0, "initial gas velocity"),
        "u0_particles": Key("float", 0.0, "initial particle velocity"),
        "reps": Key("int", 200, "realizations"),
        "t_end": Key("float", 0.5, "final time"),
        "dt": Key("float", 1e-4, "time step"),
        "cfl": Key("float", 0.5, "CFL number"),
        "nu_gas": Key("float", 0.0, "gas viscosity"),
        "particle_integrator": Key("str", "explicit_euler", "particle update",
                                   ("explicit_euler", "symplectic_euler")),
        "record_every": Key("int", 10, "steps between recorded samples"),
        "placement": Key("str", "random", "initial particle placement", ("random", "equispaced")),
        "tau_fit_points": Key("int", 4, "largest-Np points used by the effective-tau line"),
    },
    "report": {
        "dir": Key("str", ".", "directory holding experiment outputs"),
    },
}


def schema(kind: str) -> dict:
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}", key="kind")
    return {**_COMMON, **SCHEMAS[kind]}


@dataclass
class ExperimentConfig:
    kind: str
    values: dict
    sources: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def out(self) -> Path:
        return Path(self.values["out"])

    def sidecar(self, version: str) -> dict:
        return {"experiment": self.kind, "version": version, "config": dict(self.values),
                "sources": dict(self.sources)}


def _coerce(key: str, spec: Key, value):
    t = spec.type
    bad = ConfigError(f"key {key!r} expects {t}, got {value!r}", key=key)
    if value is None:
        if t in ("opt_float", "str") or spec.default is None:
            return None
        raise bad
    if t == "bool":
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise bad
    if t == "int":
        if isinstance(value, bool):
            raise bad
        if isinstance(value, int):
            out = value
        elif isinstance(value, str):
            try:
                out = int(value)
            except ValueError:
                raise bad from None
        else:
            raise bad
    elif t in ("float", "opt_float"):
        if isinstance(value, bool):
            raise bad
        if isinstance(value, (int, float)):
            out = float(value)
        elif isinstance(value, str):
            try:
                out = float(value)
            except ValueError:
                raise bad from None
        else:
            raise bad
        if not math.isfinite(out):
            raise bad
    elif t == "ints":
        if isinstance(value, str):
            parts = [p for p in value.replace(" ", "").split(",") if p]
        elif isinstance(value, (list, tuple)):
            parts = list(value)
        else:
            raise bad
        try:
            out = [_coerce(key, Key("int"), p) for p in parts]
        except ConfigError:
            raise bad from None
        if not out:
            raise bad
    elif t == "str":
        if not isinstance(value, str):
            raise bad
        out = value
    else:
        raise bad
    if spec.choices is not None and out not in spec.choices:
        raise ConfigError(f"key {key!r} must be one of {list(spec.choices)}, got {out!r}", key=key)
    return out


def load_file(path) -> dict:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {str(path)!r} not found", key="config") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {str(path)!r} is not valid YAML: {exc}", key="config") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping of keys to values", key="config")
    return data


def parse_config(kind: str, file=None, flags: dict | None = None, env=None) -> ExperimentConfig:
    """Resolve an experiment configuration; flags override the file, the file overrides defaults."""
    spec = schema(kind)
    env = os.environ if env is None else env
    file_values = load_file(file) if file is not None else {}
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    for key in list(file_values) + list(flags):
        if key not in spec:
            raise ConfigError(f"unknown key {key!r} for '{kind}'", key=key)

    values, sources = {}, {}
    for key, k in spec.items():
        if key in flags:
            raw, src = flags[key], "flag"
        elif key in file_values:
            raw, src = file_values[key], "file"
        elif key == "seed" and env.get("TURBCLOUD_SEED"):
            raw, src = env["TURBCLOUD_SEED"], "env"
        elif k.default is REQUIRED:
            raise ConfigError(f"missing required key {key!r}", key=key)
        else:
            raw, src = k.default, "default"
        values[key] = _coerce(key, k, raw)
        sources[key] = src
    if not 0 <= values["seed"] < 2**64:
        raise ConfigError("key 'seed' must be a 64-bit unsigned integer", key="seed")
    if values["workers"] is not None and values["workers"] < 1:
        raise ConfigError("key 'workers' must be positive", key="workers")
    return ExperimentConfig(kind, values, sources)
