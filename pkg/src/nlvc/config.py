"""Run configuration: parsing, validation, defaults and manifests."""

from __future__ import annotations

import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .kernels import InvalidKernel, KernelSpec, check_assumptions
from .lattice import Torus

COMMANDS = ("symbol", "verify", "poincare", "solve-cd", "solve-elasticity", "helmholtz", "localize")
TOP_KEYS = {"command", "kernel", "domain", "direction", "tol", "seed", "truncation_radius", "params"}
DOMAIN_KEYS = {"torus", "box", "h"}

DEFAULT_TOL = 1e-10
DEFAULT_SEED = 0xA11CE
DEFAULT_H = 1 / 16
DEFAULT_TRUNCATION = 1.0

PARAM_DEFAULTS: dict[str, dict] = {
    "symbol": {"radii": None, "angles": 16, "comparison": False},
    "verify": {"n": 32, "samples": 20, "backend": "direct", "corrupt": False},
    "poincare": {"dense_check": None, "h_list": None},
    "solve-cd": {"epsilon": 1.0, "velocity": None, "oscillation": 0.0, "load": "ones"},
    "solve-elasticity": {"lambda": 1.0, "mu": 1.0, "load": "ones"},
    "helmholtz": {"input": "random"},
    "localize": {"deltas": [0.2, 0.1, 0.05], "n": 256},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    kernel: KernelSpec
    box_lo: list[float]
    box_hi: list[float]
    h: float
    torus: Torus | None
    direction: list[float]
    tol: float = DEFAULT_TOL
    seed: int = DEFAULT_SEED
    truncation_radius: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.kernel.d

    @property
    def reach(self) -> float:
        """Interaction radius used to size tori and collars."""
        if self.truncation_radius is not None:
            return min(self.truncation_radius, self.kernel.delta)
        return self.kernel.delta if self.kernel.compact else DEFAULT_TRUNCATION

    def to_json(self) -> dict:
        domain = {"box": {"lo": self.box_lo, "hi": self.box_hi}, "h": self.h}
        if self.torus is not None:
            domain["torus"] = self.torus.to_json()
        return {
            "command": self.command,
            "kernel": self.kernel.to_json(),
            "domain": domain,
            "direction": self.direction,
            "tol": self.tol,
            "seed": self.seed,
            "truncation_radius": self.truncation_radius,
            "params": self.params,
        }


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _vector(value, d: int, name: str) -> list[float]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    _require(arr.shape == (d,), f"{name} needs {d} entries")
    _require(bool(np.all(np.isfinite(arr))), f"{name} must be finite")
    return [float(v) for v in arr]


def load_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    _require(isinstance(data, dict), "configuration must be a JSON object")
    if "manifest_version" in data:
        data = data["config"]
    return data


def parse_config(source, command: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Validate a configuration dict or JSON file and fill defaults.

    ``overrides`` (seed, tol) come from command-line flags and win over the file.
    """
    data = dict(load_json(source) if isinstance(source, (str, Path)) else source)
    unknown = set(data) - TOP_KEYS
    _require(not unknown, f"unknown configuration keys: {sorted(unknown)}")
    cmd = command or data.get("command")
    _require(cmd in COMMANDS, f"command must be one of {COMMANDS}, got {cmd!r}")
    if command and data.get("command") not in (None, command):
        raise ConfigError(f"config is for {data['command']!r}, not {command!r}")
    _require("kernel" in data, "missing required key 'kernel'")
    try:
        kernel = KernelSpec.from_json(data["kernel"])
    except (InvalidKernel, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid kernel: {exc}") from exc
    failed = [c for c in check_assumptions(kernel) if not c.passed]
    _require(not failed, "kernel violates assumptions: " + "; ".join(f"{c.id}: {c.detail}" for c in failed))
    d = kernel.d

    domain = data.get("domain") or {}
    _require(isinstance(domain, dict), "domain must be an object")
    unknown = set(domain) - DOMAIN_KEYS
    _require(not unknown, f"unknown domain keys: {sorted(unknown)}")
    box = domain.get("box") or {}
    _require(set(box) <= {"lo", "hi"}, "box takes 'lo' and 'hi'")
    lo = _vector(box.get("lo", [0.0] * d), d, "box.lo")
    hi = _vector(box.get("hi", [1.0] * d), d, "box.hi")
    _require(all(b > a for a, b in zip(lo, hi)), "box must have positive extent")
    torus = None
    if "torus" in domain:
        try:
            torus = Torus.from_json(domain["torus"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid torus: {exc}") from exc
        _require(torus.d == d, "torus dimension differs from kernel dimension")
    h = float(domain.get("h", torus.h if torus else DEFAULT_H))
    _require(h > 0, "grid spacing must be positive")
    _require(torus is None or math.isclose(h, torus.h), "domain.h disagrees with torus.h")

    direction = _vector(data.get("direction", np.eye(d)[0]), d, "direction")
    _require(np.linalg.norm(direction) > 0, "direction must be nonzero")

    merged = {**data, **(overrides or {})}
    tol = float(merged.get("tol", DEFAULT_TOL))
    _require(math.isfinite(tol) and tol > 0, "tolerance must be positive")
    seed = merged.get("seed", DEFAULT_SEED)
    _require(isinstance(seed, int) and 0 <= seed < 2**64, "seed must be an unsigned 64-bit integer")
    radius = data.get("truncation_radius")
    if radius is not None:
        radius = float(radius)
        _require(radius > 0, "truncation radius must be positive")

    params = dict(PARAM_DEFAULTS[cmd])
    given = data.get("params") or {}
    _require(isinstance(given, dict), "params must be an object")
    unknown = set(given) - set(params)
    _require(not unknown, f"unknown params for {cmd}: {sorted(unknown)}")
    params.update(given)
    return RunConfig(cmd, kernel, lo, hi, h, torus, direction, tol, seed, radius, params)


def manifest(cfg: RunConfig, extra: dict | None = None) -> dict:
    from . import __version__

    return {
        "manifest_version": 1,
        "code_version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_json(),
        "environment": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        **(extra or {}),
    }
