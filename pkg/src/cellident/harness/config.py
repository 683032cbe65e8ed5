"""Run configuration: one JSON file with six sections.

Every section and key is optional; missing values take the defaults below.
The environment variable ``CELLIDENT_SEED`` overrides ``harness.seed``.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..model.params import CellParameters, default_cell, params_from_dict, params_from_json
from ..optimize import SolverConfig
from ..profiles import PulseConfig, QuasiStaticConfig
from ..identify.sso import SsoConfig, _default_joint_solver, _default_prelim_solver

SEED_ENV = "CELLIDENT_SEED"
SECTIONS = ("cell", "profiles", "sensitivity", "solvers", "sso", "harness")

DEFAULTS = {
    "cell": {"params": None},
    "profiles": {"quasi_static": {}, "pulse": {}},
    "sensitivity": {"M": 1000, "threshold": 0.01, "lower": None, "upper": None},
    "solvers": {"static": {"kind": "pso"}, "baseline": {"kind": "pso"}},
    "sso": {"draws": 1, "passes": 1, "joint_bound": 0.05, "empirical": {},
            "prelim_solver": {}, "joint_solver": {}},
    "harness": {"mode": "twin", "seed": 0, "noise": 0.0, "stages": [0, 500, 1000, 1500, 2000],
                "v_min": 2.5, "v_max": 4.2, "baseline": False},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict, path="", depth=0) -> dict:
    """Overlay ``over`` on ``base``; keys are checked down to the second level,
    deeper ones are left to the dataclass they configure."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        if depth < 2 and k not in base:
            raise ConfigError(f"unknown config key {path}{k}")
        if isinstance(base.get(k), dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{path}{k}.", depth + 1)
        else:
            out[k] = v
    return out


def _solver(d: dict, base: SolverConfig) -> SolverConfig:
    return SolverConfig(**{**base.to_dict(), **d})


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    base_dir: Path = Path(".")

    def __post_init__(self):
        h = self.raw["harness"]
        if h["mode"] not in ("twin", "measured"):
            raise ConfigError("harness.mode must be 'twin' or 'measured'")
        if not h["noise"] >= 0:
            raise ConfigError("harness.noise must be >= 0")
        cell = self.raw["cell"]["params"]
        if isinstance(cell, str) and not (self.base_dir / cell).exists():
            raise ConfigError(f"cell parameter file not found: {cell}")

    @classmethod
    def load(cls, path=None, env=None) -> "RunConfig":
        env = os.environ if env is None else env
        raw, base_dir = {}, Path(".")
        if path is not None:
            path = Path(path)
            try:
                raw = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
            base_dir = path.parent
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        merged = _merge(DEFAULTS, raw)
        if env.get(SEED_ENV):
            try:
                merged["harness"]["seed"] = int(env[SEED_ENV])
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer") from None
        return cls(merged, base_dir)

    @property
    def seed(self) -> int:
        return int(self.raw["harness"]["seed"])

    @property
    def noise(self) -> float:
        return float(self.raw["harness"]["noise"])

    def cell(self) -> CellParameters:
        c = self.raw["cell"]["params"]
        if c is None:
            return default_cell()
        if isinstance(c, str):
            return params_from_json(self.base_dir / c)
        return params_from_dict(c, self.base_dir)

    def quasi_static(self) -> QuasiStaticConfig:
        return QuasiStaticConfig(**self.raw["profiles"]["quasi_static"])

    def pulse(self) -> PulseConfig:
        d = dict(self.raw["profiles"]["pulse"])
        if "durations" in d:
            d["durations"] = tuple(d["durations"])
        return PulseConfig(**d)

    def static_solver(self) -> SolverConfig:
        return _solver(self.raw["solvers"]["static"], SolverConfig(seed=self.seed))

    def baseline_solver(self) -> SolverConfig:
        return _solver(self.raw["solvers"]["baseline"], SolverConfig(seed=self.seed))

    def sso(self) -> SsoConfig:
        s = self.raw["sso"]
        return SsoConfig(seed=self.seed, draws=int(s["draws"]), passes=int(s["passes"]),
                         joint_bound=float(s["joint_bound"]),
                         empirical=dict(s["empirical"]),
                         prelim_solver=_solver(s["prelim_solver"], _default_prelim_solver()),
                         joint_solver=_solver(s["joint_solver"], _default_joint_solver()))

    def snapshot(self) -> dict:
        return copy.deepcopy(self.raw)
