"""Experiment configuration: flat key = value files parsed with configparser.

Example::

    kind = kernel-convergence
    potential = quartic12        # or even-power coefficients: 0, 0, 0.0833333
    n = 64, 128, 256
    beta = 1
    s_min = -6
    s_max = 4
    s_step = 0.25
    resolution = 60
    seed = 0
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .potential import BUILTINS, Potential, builtin

KINDS = ("equilibrium", "recurrence", "kernel-convergence", "toeplitz-residuals",
         "tw-tables", "monte-carlo")
S_RANGE = (-10.0, 8.0)
_SECTION = "experiment"


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    potential: str = "gaussian"
    d1: float = 1.0
    d2: float = 1.0
    L: float | None = None
    n: tuple = (64, 128, 256)
    beta: int = 1
    s_min: float = -6.0
    s_max: float = 4.0
    s_step: float = 0.25
    resolution: int = 60
    seed: int = 0
    x_min: float = -2.0
    x_max: float = 4.0
    x_points: int = 41
    draws: int = 10_000
    chains: int = 1000
    steps: int = 200
    burn_in: int = 200
    thin: int = 10
    ks_tol: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.beta not in (1, 2):
            raise ConfigError("beta must be 1 or 2")
        if not self.n or any(v < 2 for v in self.n):
            raise ConfigError("n ladder must hold integers >= 2")
        needs_even = self.kind in ("kernel-convergence", "toeplitz-residuals") or (
            self.beta == 1 and self.kind == "monte-carlo" and self.potential != "gaussian")
        if needs_even and any(v % 2 for v in self.n):
            raise ConfigError("n must be even for orthogonal-ensemble (beta = 1) experiments")
        lo, hi = S_RANGE
        if not (lo <= self.s_min <= self.s_max <= hi):
            raise ConfigError(f"s-grid [{self.s_min}, {self.s_max}] must lie within [{lo}, {hi}]")
        if self.s_step <= 0:
            raise ConfigError("s_step must be positive")
        if self.resolution < 4:
            raise ConfigError("resolution must be at least 4")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.x_points < 2 or not self.x_min < self.x_max:
            raise ConfigError("kernel grid needs x_min < x_max and x_points >= 2")
        self.build_potential()  # validates the potential description

    @property
    def s_grid(self):
        count = int(round((self.s_max - self.s_min) / self.s_step))
        return self.s_min + self.s_step * np.arange(count + 1)

    @property
    def x_grid(self):
        return np.linspace(self.x_min, self.x_max, self.x_points)

    def build_potential(self) -> Potential:
        strip = (self.d1, self.d2)
        try:
            if self.potential in BUILTINS:
                return builtin(self.potential, strip=strip, L=self.L)
            coeffs = [float(c) for c in self.potential.split(",")]
            return Potential.from_even_coeffs(coeffs, name="polynomial", strip=strip, L=self.L)
        except ValueError as exc:
            raise ConfigError(f"bad potential {self.potential!r}: {exc}") from None

    def to_dict(self):
        d = asdict(self)
        d["n"] = list(self.n)
        return d

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return ExperimentConfig(**d)


_INT = {"beta", "resolution", "seed", "x_points", "draws", "chains", "steps", "burn_in", "thin"}
_FLOAT = {"d1", "d2", "L", "s_min", "s_max", "s_step", "x_min", "x_max", "ks_tol"}


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse key = value text (no section header needed); `overrides` win over the file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    raw = dict(parser[_SECTION])
    if not raw:
        raise ConfigError("empty configuration")
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    if "kind" not in raw:
        raise ConfigError("configuration does not name an experiment kind")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    values = {}
    for key, val in raw.items():
        val = val.strip()
        try:
            if key == "n":
                values[key] = tuple(int(v) for v in val.split(","))
            elif key in _INT:
                values[key] = int(val)
            elif key in _FLOAT:
                values[key] = None if val.lower() in ("", "none") else float(val)
            else:
                values[key] = val
        except ValueError:
            raise ConfigError(f"bad value for {key}: {val!r}") from None
    return ExperimentConfig(**values)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)
