"""Flat key=value experiment configuration with strict keys and lossless round-trip."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np

COMMANDS = ("annealed-curve", "phase-portrait", "quenched-mc", "second-moment", "spectral-check", "verify")
STOCHASTIC = ("quenched-mc", "verify")
SUITES = ("oracles", "inequalities", "asymptotics", "spectral", "all")
FAULTS = ("none", "uhat")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """A non-empty grid written as ``lin:a:b:k``, ``log:a:b:k`` or ``v1,v2,...``."""

    kind: str
    values: tuple[float, ...]
    spec: tuple[float, float, int] | None = None

    @classmethod
    def parse(cls, text: str) -> "Grid":
        text = text.strip()
        if text.startswith(("lin:", "log:")):
            parts = text.split(":")
            if len(parts) != 4:
                raise ConfigError(f"bad grid {text!r}")
            a, b, k = float(parts[1]), float(parts[2]), int(parts[3])
            if k < 1:
                raise ConfigError("grid needs at least one point")
            if parts[0] == "log":
                if a <= 0 or b <= 0:
                    raise ConfigError("log grid needs positive ends")
                vals = np.geomspace(a, b, k)
            else:
                vals = np.linspace(a, b, k)
            return cls(parts[0], tuple(float(v) for v in vals), (a, b, k))
        items = [s for s in text.split(",") if s.strip()]
        if not items:
            raise ConfigError("empty grid")
        return cls("list", tuple(float(s) for s in items))

    def text(self) -> str:
        if self.spec is not None:
            a, b, k = self.spec
            return f"{self.kind}:{a!r}:{b!r}:{k}"
        return ",".join(repr(v) for v in self.values)

    def as_ints(self) -> tuple[int, ...]:
        out = tuple(int(round(v)) for v in self.values)
        if any(abs(a - b) > 0 for a, b in zip(out, self.values)):
            raise ConfigError("grid must hold integers")
        return out


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return v


_TYPES: dict[str, Any] = {
    "alpha": float,
    "alpha_hat": float,
    "beta": float,
    "beta_grid": Grid.parse,
    "h_grid": Grid.parse,
    "alpha_grid": Grid.parse,
    "alpha_hat_grid": Grid.parse,
    "n_grid": Grid.parse,
    "fit_grid": Grid.parse,
    "theta": float,
    "n": int,
    "replicas": int,
    "horizon": int,
    "seed": _parse_seed,
    "tol": float,
    "suite": str,
    "evidence": _parse_bool,
    "inject_fault": str,
}

_DEFAULTS: dict[str, dict[str, str]] = {
    "annealed-curve": {"alpha": "0.5", "alpha_hat": "1.3", "beta_grid": "lin:0.0:2.0:21",
                       "tol": "1e-12", "horizon": "2000",
                       "fit_grid": "log:0.0001:0.01:10"},
    "phase-portrait": {"alpha_grid": "lin:0.1:2.0:20", "alpha_hat_grid": "lin:0.15:3.0:20",
                       "evidence": "false", "beta": "0.05", "n": "300"},
    "quenched-mc": {"alpha": "0.6", "alpha_hat": "2.5", "beta_grid": "0.5", "h_grid": "0.0",
                    "n": "2000", "replicas": "16"},
    "second-moment": {"alpha": "0.3", "alpha_hat": "2.5", "beta_grid": "0.05",
                      "n_grid": "lin:50:300:6", "horizon": "400"},
    "spectral-check": {"alpha": "2.5", "theta": "0.0", "n": "2000", "horizon": "4096"},
    "verify": {"suite": "all", "inject_fault": "none"},
}


def _fmt(value: Any) -> str:
    if isinstance(value, Grid):
        return value.text()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    values: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for k in self.values:
            if k not in _TYPES:
                raise ConfigError(f"unknown key {k!r}")
        if self.command in STOCHASTIC and "seed" not in self.values:
            raise ConfigError(f"{self.command} is stochastic: a seed is mandatory")
        suite = self.values.get("suite")
        if suite is not None and suite not in SUITES:
            raise ConfigError(f"unknown suite {suite!r}")
        fault = self.values.get("inject_fault")
        if fault is not None and fault not in FAULTS:
            raise ConfigError(f"unknown fault {fault!r}")

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    @property
    def seed(self) -> int | None:
        return self.values.get("seed")

    def to_text(self) -> str:
        lines = [f"command={self.command}"]
        lines += [f"{k}={_fmt(self.values[k])}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_text(cls, text: str, command: str | None = None,
                  overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            if k in raw:
                raise ConfigError(f"line {lineno}: duplicate key {k!r}")
            raw[k] = v
        file_cmd = raw.pop("command", None)
        if command is None:
            command = file_cmd
        elif file_cmd is not None and file_cmd != command:
            raise ConfigError(f"config is for {file_cmd!r}, not {command!r}")
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        merged = dict(_DEFAULTS[command])
        merged.update(raw)
        merged.update(overrides or {})
        values = {}
        for k, v in merged.items():
            if k not in _TYPES:
                raise ConfigError(f"unknown key {k!r}")
            try:
                values[k] = _TYPES[k](v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from None
        return cls(command, values)
