"""Run configuration: one JSON file with scenario, channel, solver and protocol sections."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .channel import ChannelParams
from .errors import ConfigError
from .scenario import ScenarioConfig
from .slot import SolverSettings


@dataclass(frozen=True)
class ProtocolSettings:
    snr_threshold_db: float = 10.0
    n_u2u: int | None = None  # None: threshold mode; otherwise the n lowest-SNR UAVs use U2U
    sense_bits: float = 4.0  # sensed data per UAV per slot
    capacity_scale: float = 1.0  # bits moved per unit of rate per slot


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    solver: SolverSettings = field(default_factory=SolverSettings)
    protocol: ProtocolSettings = field(default_factory=ProtocolSettings)

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, scenario=dataclasses.replace(self.scenario, rng_seed=int(seed)))

    def to_dict(self) -> dict:
        return {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}

    def validate(self) -> "RunConfig":
        self.scenario.validate()
        self.channel.validate()
        s = self.solver
        if s.chi_max < 1 or s.max_iter < 1 or s.eps < 0 or s.r_min < 0:
            raise ConfigError("solver: need chi_max >= 1, max_iter >= 1, eps >= 0, r_min >= 0")
        if s.bnb_budget is not None and s.bnb_budget < 1:
            raise ConfigError("solver: bnb_budget must be >= 1 or null")
        p = self.protocol
        if p.sense_bits < 0 or p.capacity_scale < 0:
            raise ConfigError("protocol: sense_bits and capacity_scale must be >= 0")
        if p.n_u2u is not None and not 0 <= p.n_u2u <= self.scenario.n_uavs:
            raise ConfigError(f"protocol: n_u2u={p.n_u2u} outside [0, n_uavs]")
        return self


_SECTIONS = {
    "scenario": ScenarioConfig,
    "channel": ChannelParams,
    "solver": SolverSettings,
    "protocol": ProtocolSettings,
}


def _build(cls, section: str, values: dict):
    if not isinstance(values, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {section!r}: {exc}") from exc


def config_from_dict(d: dict) -> RunConfig:
    unknown = sorted(set(d) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    parts = {name: _build(cls, name, d.get(name, {})) for name, cls in _SECTIONS.items()}
    return RunConfig(**parts).validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)


def bundled_config(name: str) -> RunConfig:
    """Load one of the configs shipped with the package ("default" or "desk")."""
    text = resources.files("uav2x").joinpath("configs").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return config_from_dict(json.loads(text))
