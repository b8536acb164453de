"""Scenario configuration files and the shipped presets.

A config is one JSON document::

    {"source":  {"probs": [...], "t": 0.5},
     "channel": {"rows": [[...], ...]},
     "grids":   {"rho_max": 1e4, "rho_points": 200, "r_points": 200, "q_resolution": 0.05},
     "sim":     {"k": 4, "n_list": [8, 16], "trials": 10000, "best_of": 4, "seed": 1}}

``grids`` and ``sim`` are optional.  Probabilities are checked to 1e-12 and
never renormalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .prob import Channel, Distribution, ValidationError

DEFAULT_GRIDS = {"rho_max": 1e4, "rho_points": 200, "r_points": 200, "q_resolution": 0.05}
DEFAULT_SIM = {"k": 4, "n_list": [8, 16], "trials": 10_000, "best_of": 4, "seed": 1}


@dataclass(frozen=True)
class Grids:
    rho_max: float = 1e4
    rho_points: int = 200
    r_points: int = 200
    q_resolution: float = 0.05

    def rhos(self) -> np.ndarray:
        return np.geomspace(1.0, self.rho_max, self.rho_points)


@dataclass(frozen=True)
class SimSettings:
    k: int = 4
    n_list: tuple = (8, 16)
    trials: int = 10_000
    best_of: int = 4
    seed: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated (source, channel, t) scenario with its grids and simulation settings."""

    source: Distribution
    t: float
    channel: Channel
    grids: Grids = field(default_factory=Grids)
    sim: SimSettings = field(default_factory=SimSettings)
    name: str = ""
    note: str = ""

    def with_grids(self, **changes) -> ScenarioConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, grids=replace(self.grids, **changes))

    def with_sim(self, **changes) -> ScenarioConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, sim=replace(self.sim, **changes))


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key)
    if not isinstance(value, dict):
        raise ValidationError(f"config needs an object under '{key}'")
    return value


def _known(section: dict, defaults: dict, name: str) -> dict:
    extra = set(section) - set(defaults)
    if extra:
        raise ValidationError(f"unknown keys in '{name}': {sorted(extra)}")
    return {**defaults, **section}


def parse_config(doc: dict) -> ScenarioConfig:
    """Validate a decoded config document."""
    src = _section(doc, "source")
    ch = _section(doc, "channel")
    if "probs" not in src or "t" not in src:
        raise ValidationError("source needs 'probs' and 't'")
    t = float(src["t"])
    if not np.isfinite(t) or t <= 0:
        raise ValidationError(f"transmission rate t must be positive, got {src['t']}")
    if "rows" not in ch:
        raise ValidationError("channel needs 'rows'")
    source = Distribution(np.asarray(src["probs"], dtype=float))
    channel = Channel(np.asarray(ch["rows"], dtype=float))
    g = _known(doc.get("grids", {}), DEFAULT_GRIDS, "grids")
    grids = Grids(float(g["rho_max"]), int(g["rho_points"]), int(g["r_points"]), float(g["q_resolution"]))
    if grids.rho_max <= 1 or grids.rho_points < 2 or grids.r_points < 2:
        raise ValidationError("grids need rho_max > 1 and at least two points")
    if not 0 < grids.q_resolution <= 1:
        raise ValidationError("q_resolution must lie in (0, 1]")
    s = _known(doc.get("sim", {}), DEFAULT_SIM, "sim")
    sim = SimSettings(int(s["k"]), tuple(int(n) for n in s["n_list"]), int(s["trials"]), int(s["best_of"]), int(s["seed"]))
    if sim.k < 1 or sim.trials < 1 or sim.best_of < 1 or any(n < 1 for n in sim.n_list):
        raise ValidationError("sim settings must be positive")
    return ScenarioConfig(source, t, channel, grids, sim, str(doc.get("name", "")), str(doc.get("note", "")))


def preset_names() -> list[str]:
    files = resources.files("jscc_exponents").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_preset(name: str) -> ScenarioConfig:
    path = resources.files("jscc_exponents").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise ValidationError(f"unknown preset '{name}'; available: {', '.join(preset_names())}")
    return parse_config(json.loads(path.read_text()))


def validate_config(path) -> ScenarioConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return parse_config(doc)
