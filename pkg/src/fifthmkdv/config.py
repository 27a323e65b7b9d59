"""Run configuration: nested YAML sections with defaults, strict keys and validation."""

from __future__ import annotations

import dataclasses
import math
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .wavepacket import S_MAX, S_MIN

EXPERIMENTS = ("approx", "illposed", "counterexample", "resonance", "suite")
OUTPUT_ENV = "FIFTHMKDV_OUTPUT_DIR"


@dataclass
class EquationSection:
    c1: float = 1.0
    c2: float = 0.0
    c3: float = 0.0
    c0: float = 0.0


@dataclass
class ApproxSection:
    N: list[float] = field(default_factory=lambda: [8.0, 16.0, 32.0])
    eps: float = 0.05
    s: float = 0.75
    envelope_length: float = 32.0
    envelope_points: int = 256
    nls_dt: float = 2e-3
    dt: float = 1e-2
    T: float = 1.0
    samples: int = 11
    band_factor: float = 1.5
    slope_threshold: float = -2.0


@dataclass
class IllposedSection:
    s: float = -0.2
    eps: float = 0.1
    delta: float = 1e-3
    N: float = 16.0
    amplitude: float = 1.2
    focusing: bool = True
    T: float = 8.0
    samples: int = 33
    envelope_length: float = 40.0
    envelope_points: int = 256
    nls_dt: float = 1e-3
    dt: float = 1e-2
    band_factor: float = 1.25
    amplification: float = 10.0
    size_factor: float = 2.0
    control_factor: float = 1e-6
    horizon_factor: float = 4.0


@dataclass
class CounterexampleSection:
    N: list[float] = field(default_factory=lambda: [16.0, 32.0, 64.0, 128.0, 256.0, 512.0])
    s: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75])
    b: float = 0.51
    alpha_cells: int = 48
    bin_width: float = 0.02
    slope_tolerance: float = 0.15


@dataclass
class ResonanceSection:
    samples: int = 100_000
    bound: float = 32.0
    block_specs: int = 100
    block_seed: int = 2024
    trials: int = 10_000
    mc_samples: int = 100_000
    bound_factor: float = 8.0


@dataclass
class SuiteSection:
    oracles: list[str] = field(
        default_factory=lambda: [
            "linear_phase",
            "nls_constant",
            "nls_mass",
            "mkdv_mass",
            "mkdv_linear",
            "mkdv_reality",
            "mkdv_order",
            "nls_order",
            "resonance_identity",
            "block_vanishing",
        ]
    )
    dt_factor: float = 1.0


@dataclass
class RunConfig:
    experiment: str = "suite"
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    equation: EquationSection = field(default_factory=EquationSection)
    approx: ApproxSection = field(default_factory=ApproxSection)
    illposed: IllposedSection = field(default_factory=IllposedSection)
    counterexample: CounterexampleSection = field(default_factory=CounterexampleSection)
    resonance: ResonanceSection = field(default_factory=ResonanceSection)
    suite: SuiteSection = field(default_factory=SuiteSection)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data, validate=True):
        cfg = _build(cls, data or {}, "")
        if validate:
            cfg.validate()
        return cfg

    def with_overrides(self, pairs):
        data = self.to_dict()
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(pair, "override must look like key=value")
            key, raw = pair.split("=", 1)
            parts = key.strip().split(".")
            node = data
            for i, p in enumerate(parts[:-1]):
                if not isinstance(node.get(p), dict):
                    raise ConfigError(".".join(parts[: i + 1]), "unknown section")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(key, "unknown key")
            try:
                node[parts[-1]] = yaml.safe_load(raw)
            except yaml.YAMLError as exc:
                raise ConfigError(key, f"cannot parse value {raw!r}: {exc}") from None
        return RunConfig.from_dict(data)

    def resolved_output_dir(self):
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    # validation -------------------------------------------------------------

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        _positive(self, "workers")
        a = self.approx
        for i, n in enumerate(a.N):
            if not n > 0:
                raise ConfigError(f"approx.N[{i}]", "carrier must be positive")
        if a.eps < 0:
            raise ConfigError("approx.eps", "must be >= 0")
        for name in ("envelope_length", "nls_dt", "dt", "T", "band_factor"):
            _positive(a, name, "approx")
        _even(a, "envelope_points", "approx")
        if a.samples < 2:
            raise ConfigError("approx.samples", "need at least 2 sample times")
        if a.band_factor <= 1:
            raise ConfigError("approx.band_factor", "must exceed 1 so the carrier band is kept")
        p = self.illposed
        if self.experiment == "illposed" and not (S_MIN < p.s < S_MAX):
            raise ConfigError("illposed.s", f"s = {p.s} is outside the range -7/24 < s < 3/4")
        for name in ("eps", "N", "amplitude", "T", "envelope_length", "nls_dt", "dt", "amplification", "size_factor", "horizon_factor"):
            _positive(p, name, "illposed")
        if p.delta < 0:
            raise ConfigError("illposed.delta", "must be >= 0")
        if p.horizon_factor < 1:
            raise ConfigError("illposed.horizon_factor", "must be >= 1")
        if p.delta >= p.eps:
            raise ConfigError("illposed.delta", "need delta << eps")
        _even(p, "envelope_points", "illposed")
        if p.samples < 2:
            raise ConfigError("illposed.samples", "need at least 2 sample times")
        c = self.counterexample
        for i, n in enumerate(c.N):
            if not n >= 2:
                raise ConfigError(f"counterexample.N[{i}]", "carrier must be >= 2")
        if not 0.5 < c.b < 1:
            raise ConfigError("counterexample.b", "need 1/2 < b < 1")
        _positive(c, "alpha_cells", "counterexample")
        _positive(c, "bin_width", "counterexample")
        r = self.resonance
        for name in ("samples", "bound", "trials", "mc_samples", "bound_factor"):
            _positive(r, name, "resonance")
        if r.block_specs < 0:
            raise ConfigError("resonance.block_specs", "must be >= 0")
        from .experiments import ORACLES  # local import: experiments imports this module

        for i, name in enumerate(self.suite.oracles):
            if name not in ORACLES:
                raise ConfigError(f"suite.oracles[{i}]", f"unknown oracle {name!r}")
        _positive(self.suite, "dt_factor", "suite")
        return self


def _positive(obj, name, section=None):
    v = getattr(obj, name)
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{section}.{name}" if section else name, "must be positive and finite")


def _even(obj, name, section):
    v = getattr(obj, name)
    if v < 8 or v % 2:
        raise ConfigError(f"{section}.{name}", "must be an even integer >= 8")


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    if origin is list:
        (inner,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return [_coerce(inner, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(path, "expected an integer")
        return int(value)
    if tp is float:
        if isinstance(value, str):
            # YAML 1.1 reads 1e-3 (no dot) as a string
            try:
                return float(value)
            except ValueError:
                raise ConfigError(path, "expected a number") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    return _build(tp, value, path)


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")
    kwargs = {}
    for name in names:
        if name in data:
            kwargs[name] = _coerce(hints[name], data[name], f"{path}.{name}" if path else name)
    return cls(**kwargs)


def parse_config(path=None, overrides=(), experiment=None) -> RunConfig:
    """Read a YAML config (``None`` means all defaults), apply ``key=value`` overrides."""
    data = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(str(path), "config file not found")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(str(path), f"parse error: {exc}") from None
    if experiment is not None:
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected a mapping")
        data = dict(data, experiment=experiment)
    cfg = RunConfig.from_dict(data, validate=not overrides)
    return cfg.with_overrides(overrides) if overrides else cfg
