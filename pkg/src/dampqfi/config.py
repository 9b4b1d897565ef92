"""Run configuration: one JSON document, per-command defaults, CLI overrides."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError, DampQfiError
from .fock import SystemConfig
from .moo import GridSpec
from .sme import CandidateSet

COMMANDS = ("qfi-curve", "fidelity-curve", "optimize", "scan-alpha", "estimate", "evolve")

_CURVE_DEFAULTS = dict(alpha_re=1.0, u1=0.05, u2=0.05, dim=10, tau_grid=[0.0, 6.0, 121])

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "qfi-curve": dict(scenario="qfi-vs-time", **_CURVE_DEFAULTS),
    "fidelity-curve": dict(scenario="fidelity-vs-time", **_CURVE_DEFAULTS),
    "optimize": dict(
        scenario="epsilon-constraint",
        alpha_re=math.sqrt(0.2),
        grid={"u1": [0.0, 0.99, 201], "u2": [0.0, 0.99, 201], "alpha2": [0.2, 0.2, 1]},
        epsilons=[0.10, 0.15],
    ),
    "scan-alpha": dict(
        scenario="kerr-alpha-scan",
        grid={"u1": [0.0, 0.0, 1], "u2": [0.0, 0.99, 100], "alpha2": [0.0, 0.99, 100]},
    ),
    "estimate": dict(
        scenario="sme-estimate",
        alpha_re=4.0,
        u1=0.9,
        u2=0.0,
        dim=30,
        efficiency=1.0,
        duration=10.0,
        dt=1e-3,
        candidates=[1 / 9, 1 / 3, 1.0, 3.0, 9.0],
    ),
    "evolve": dict(scenario="evolve", alpha_re=1.0, u1=0.05, u2=0.05, dim=20, tau_grid=[0.0, 3.0, 7]),
}


@dataclass
class RunConfig:
    scenario: str = "default"
    alpha_re: float = 1.0
    alpha_im: float = 0.0
    gamma: float = 1.0
    u1: float = 0.0
    u2: float = 0.0
    dim: int = 20
    tau_grid: list = field(default_factory=lambda: [0.0, 6.0, 121])
    grid: dict = field(default_factory=lambda: {"u1": [0.0, 0.99, 201], "u2": [0.0, 0.99, 201],
                                                "alpha2": [0.2, 0.2, 1]})
    epsilons: list = field(default_factory=lambda: [0.10, 0.15])
    seed: int = 0
    efficiency: float = 1.0
    duration: float = 10.0
    dt: float = 1e-3
    # rate list, or {"center", "spread", "n", "seed"} for random draws
    candidates: Any = field(default_factory=lambda: [1 / 9, 1 / 3, 1.0, 3.0, 9.0])
    out_dir: str = "out"
    format: str = "csv"

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)

    # derived objects -------------------------------------------------
    def system(self, **changes) -> SystemConfig:
        try:
            base = SystemConfig(alpha=complex(self.alpha_re, self.alpha_im), gamma=self.gamma,
                                u1=self.u1, u2=self.u2, dim=self.dim)
            return base.replace(**changes) if changes else base
        except DampQfiError as exc:
            raise ConfigError(str(exc)) from exc

    def taus(self) -> list[float]:
        start, stop, count = self.tau_grid
        if count == 1:
            return [float(start)]
        return [start + (stop - start) * k / (count - 1) for k in range(count)]

    def grid_spec(self) -> GridSpec:
        try:
            return GridSpec(tuple(self.grid["u1"]), tuple(self.grid["u2"]), tuple(self.grid["alpha2"]))
        except DampQfiError as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def candidate_set(self):
        from .sme import generate_candidates

        try:
            if isinstance(self.candidates, dict):
                c = self.candidates
                return generate_candidates(float(c["center"]), float(c.get("spread", 0.0)),
                                           int(c.get("n", 1)), int(c.get("seed", self.seed)))
            return CandidateSet.uniform([float(x) for x in self.candidates])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"candidates: malformed value {self.candidates!r}") from exc
        except DampQfiError as exc:
            raise ConfigError(f"candidates: {exc}") from exc

    def validate(self) -> "RunConfig":
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be 'csv' or 'json', got {self.format!r}")
        if not isinstance(self.tau_grid, (list, tuple)) or len(self.tau_grid) != 3:
            raise ConfigError("tau_grid must be [start, stop, count]")
        start, stop, count = self.tau_grid
        if int(count) != count or count < 1 or start < 0 or stop < start:
            raise ConfigError(f"tau_grid must satisfy 0 <= start <= stop, count >= 1; got {self.tau_grid}")
        self.tau_grid = [float(start), float(stop), int(count)]
        if not isinstance(self.grid, dict):
            raise ConfigError("grid must be an object with u1, u2, alpha2 triples")
        extra = set(self.grid) - {"u1", "u2", "alpha2"}
        if extra:
            raise ConfigError(f"unknown grid axis {sorted(extra)[0]!r}")
        missing = {"u1", "u2", "alpha2"} - set(self.grid)
        if missing:
            raise ConfigError(f"grid is missing axis {sorted(missing)[0]!r}")
        self.grid_spec()
        self.epsilons = [float(e) for e in self.epsilons]
        for e in self.epsilons:
            if not 0 < e <= 1:
                raise ConfigError(f"epsilons must lie in (0, 1], got {e}")
        if not 0 <= self.efficiency <= 1:
            raise ConfigError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not self.duration > 0 or not self.dt > 0:
            raise ConfigError("duration and dt must be positive")
        self.system()
        self.candidate_set()
        return self


def _coerce(key: str, value):
    """Convert a CLI string override to the field's type."""
    template = getattr(RunConfig(), key)
    if isinstance(template, (list, dict)) or key == "candidates":
        try:
            return json.loads(value)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--{key}: expected JSON, got {value!r}") from exc
    if isinstance(template, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(template, int):
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"--{key}: expected integer, got {value!r}") from exc
    if isinstance(template, float):
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"--{key}: expected number, got {value!r}") from exc
    return value


def load_document(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def build_run_config(command: str, document: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Command defaults, then the configuration document, then CLI overrides."""
    known = set(RunConfig.keys())
    merged = dict(COMMAND_DEFAULTS.get(command, {}))
    for source in (document or {}, overrides or {}):
        for key, value in source.items():
            if key not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            merged[key] = value
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
