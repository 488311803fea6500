"""Experiment configuration: YAML in, validated dataclass out, stable hash."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..model import ModelParams, classify_regime, norming
from ..testfunctions import TestFunction, TimeProfile

KINDS = ("fluctuation-limit", "laplace-triangle", "deterministic-limits", "tail-bound", "calibration")
OUTPUT_ROOT_ENV = "BRANCHFLUCT_OUTPUT_ROOT"

# keys that do not change what is computed, only where and how fast
_NON_IDENTITY = ("output_dir", "workers", "replicas", "name")


class ConfigError(ValueError):
    pass


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "branchfluct-runs"))


def _test_function(spec: dict, d: int) -> TestFunction:
    spec = dict(spec or {"kind": "gaussian"})
    kind = spec.pop("kind", "gaussian")
    if kind == "gaussian":
        center = spec.pop("center", None)
        tf = TestFunction.gaussian(d, float(spec.pop("sigma", 1.0)), float(spec.pop("height", 1.0)), center)
    elif kind == "sum":
        tf = TestFunction(spec.pop("centers"), spec.pop("widths"), spec.pop("heights"))
    elif kind == "zero":
        tf = TestFunction.zero(d)
    else:
        raise ConfigError(f"unknown test function kind {kind!r}")
    if spec:
        raise ConfigError(f"unknown test function keys {sorted(spec)}")
    if tf.d != d:
        raise ConfigError("test function dimension does not match the model")
    return tf


def _time_profile(spec: dict) -> TimeProfile:
    spec = dict(spec or {"kind": "constant"})
    try:
        return TimeProfile(**spec)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    ``raw`` keeps the parsed mapping exactly as given (after defaults) so the
    run directory can echo it and the hash is computed from it.
    """

    kind: str
    params: ModelParams
    T: list
    replicas: int
    seed: int
    dt: float
    phi: TestFunction
    psi: TimeProfile
    raw: dict
    output_dir: Path | None = None
    block_size: int = 100
    workers: int = 1
    t_values: list = field(default_factory=lambda: [1.0])
    box_half_width: float | list | None = None
    bias_budget: float | None = None
    centering: str = "truncated"
    norming: dict | str = "auto"
    assertions: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    max_population: int = 4_000_000

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def half_width_for(self, T: float) -> float | None:
        if isinstance(self.box_half_width, list):
            return self.box_half_width[self.T.index(T)]
        return self.box_half_width

    def norming_for(self, T: float) -> float:
        spec = self.norming
        if spec == "auto":
            return norming(self.params, T)
        if isinstance(spec, dict):
            if "power" in spec:
                return T ** float(spec["power"])
            if "t_log_power" in spec:
                return (T * math.log(T)) ** float(spec["t_log_power"])
            if "value" in spec:
                return float(spec["value"])
        raise ConfigError(f"bad norming spec {spec!r}")


def config_hash(raw: dict) -> str:
    ident = {k: v for k, v in raw.items() if k not in _NON_IDENTITY}
    blob = json.dumps(ident, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config mapping; raises :class:`ConfigError` with the first problem found."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = copy.deepcopy(raw)
    known = {"name", "kind", "model", "expect_regime", "T", "replicas", "seed", "dt", "test_function",
             "time_profile", "output_dir", "block_size", "workers", "t_values", "box", "centering", "norming",
             "assertions", "stats", "options", "max_population"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}")
    model = raw.get("model")
    if not isinstance(model, dict):
        raise ConfigError("model section missing")
    try:
        params = ModelParams(int(model["d"]), float(model["alpha"]), float(model["beta"]),
                             float(model.get("V", 1.0)), float(model.get("intensity", 1.0)))
    except KeyError as exc:
        raise ConfigError(f"model needs {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    expect = raw.get("expect_regime")
    if expect is not None and classify_regime(params).regime.value != expect:
        raise ConfigError(f"regime is {classify_regime(params).regime.value}, config expects {expect}")
    T = raw.get("T", [])
    T = [float(t) for t in (T if isinstance(T, list) else [T])]
    if any(t <= 0 for t in T):
        raise ConfigError("T values must be positive")
    replicas = int(raw.get("replicas", 0))
    if replicas < 0:
        raise ConfigError("replicas must be nonnegative")
    dt = float(raw.get("dt", 0.1))
    if dt <= 0:
        raise ConfigError("dt must be positive")
    for t in T:
        if kind in ("fluctuation-limit", "laplace-triangle", "tail-bound") and abs(round(t / dt) * dt - t) > 1e-9 * t:
            raise ConfigError(f"T={t} is not a multiple of dt={dt}")
    t_values = [float(v) for v in raw.get("t_values", [1.0])]
    if any(not 0.0 <= v <= 1.0 for v in t_values):
        raise ConfigError("t_values must lie in [0, 1]")
    box = raw.get("box", {}) or {}
    bhw = box.get("half_width")
    budget = box.get("bias_budget")
    if kind in ("fluctuation-limit", "laplace-triangle", "tail-bound") and bhw is None and budget is None:
        raise ConfigError("box needs half_width or bias_budget")
    if isinstance(bhw, list):
        if len(bhw) != len(T):
            raise ConfigError("box.half_width list must have one entry per T")
        bhw = [float(b) for b in bhw]
    elif bhw is not None:
        bhw = float(bhw)
    if bhw is not None and min(np.atleast_1d(bhw)) <= 0:
        raise ConfigError("box.half_width must be positive")
    centering = raw.get("centering", "truncated")
    if centering not in ("exact", "truncated"):
        raise ConfigError("centering must be exact or truncated")
    block = int(raw.get("block_size", 100))
    if block < 1:
        raise ConfigError("block_size must be positive")
    out = raw.get("output_dir")
    cfg = ExperimentConfig(
        kind=kind, params=params, T=T, replicas=replicas, seed=int(raw.get("seed", 0)), dt=dt,
        phi=_test_function(raw.get("test_function"), params.d), psi=_time_profile(raw.get("time_profile")),
        raw=raw, output_dir=Path(out) if out else None, block_size=block, workers=int(raw.get("workers", 1)),
        t_values=t_values, box_half_width=bhw,
        bias_budget=None if budget is None else float(budget), centering=centering,
        norming=raw.get("norming", "auto"), assertions=dict(raw.get("assertions", {}) or {}),
        stats=dict(raw.get("stats", {}) or {}), options=dict(raw.get("options", {}) or {}),
        max_population=int(raw.get("max_population", 4_000_000)))
    if kind in ("fluctuation-limit", "tail-bound"):
        for t in T:
            try:
                cfg.norming_for(t)
            except ValueError as exc:
                raise ConfigError(f"norming at T={t}: {exc}") from exc
    return cfg


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if overrides:
        raw = apply_overrides(raw, overrides)
    return parse_config(raw)


def apply_overrides(raw: dict, overrides: dict) -> dict:
    """Dotted-key overrides, e.g. ``{"model.alpha": 1.5, "replicas": 10}``."""
    raw = copy.deepcopy(raw)
    for key, value in overrides.items():
        node = raw
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return raw


def dump_config(raw: dict) -> str:
    return yaml.safe_dump(raw, sort_keys=True)
