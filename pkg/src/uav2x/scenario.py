"""Geometry, mobility state and scenario generation.

The base station sits at the origin with antenna height ``bs_height``; the
deployment area is centred on it. UAVs fly straight, horizontal
trajectories at a fixed altitude; CUs are static ground terminals.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CategorizationError, ConfigError, DomainError, HorizonInfeasible

CU_HEIGHT = 1.5


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class UavState:
    id: int
    position: Vec3
    direction: Vec3
    trajectory_length: float
    progress: float = 0.0
    cache_bits: float = 0.0

    @property
    def remaining(self) -> float:
        return self.trajectory_length - self.progress


@dataclass(frozen=True)
class CuState:
    id: int
    position: Vec3


@dataclass(frozen=True)
class ScenarioState:
    uavs: tuple[UavState, ...]
    cus: tuple[CuState, ...]
    bs_height: float
    slot: int = 0
    u2i_set: tuple[int, ...] = ()
    u2u_set: tuple[int, ...] = ()
    pairing: dict[int, int] = field(default_factory=dict)

    @property
    def n_uavs(self) -> int:
        return len(self.uavs)

    def uav_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.uavs], dtype=float).reshape(-1, 3)

    def uav_directions(self) -> np.ndarray:
        return np.array([u.direction for u in self.uavs], dtype=float).reshape(-1, 3)

    def cu_positions(self) -> np.ndarray:
        return np.array([c.position for c in self.cus], dtype=float).reshape(-1, 3)

    def replace(self, **changes) -> "ScenarioState":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "bs_height": self.bs_height,
            "uavs": [
                {
                    "id": u.id,
                    "position": list(u.position),
                    "direction": list(u.direction),
                    "trajectory_length": u.trajectory_length,
                    "progress": u.progress,
                    "cache_bits": u.cache_bits,
                }
                for u in self.uavs
            ],
            "cus": [{"id": c.id, "position": list(c.position)} for c in self.cus],
            "u2i_set": list(self.u2i_set),
            "u2u_set": list(self.u2u_set),
            "pairing": {str(k): v for k, v in sorted(self.pairing.items())},
        }


@dataclass(frozen=True)
class ScenarioConfig:
    n_uavs: int = 20
    n_cus: int = 5
    n_subchannels: int = 10
    area_x: float = 2000.0
    area_y: float = 2000.0
    h_max: float = 200.0
    bs_height: float = 25.0
    v_max: float = 10.0
    horizon_T: int = 40
    trajectory_length: float = 300.0
    rng_seed: int = 0
    cu_height: float = CU_HEIGHT

    def validate(self) -> "ScenarioConfig":
        for name in ("n_uavs", "n_cus", "n_subchannels", "horizon_T"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.area_x <= 0 or self.area_y <= 0 or self.h_max < 0:
            raise ConfigError("area dimensions must be positive")
        if self.v_max <= 0:
            raise ConfigError(f"v_max must be > 0, got {self.v_max}")
        if self.trajectory_length < 0:
            raise ConfigError("trajectory_length must be >= 0")
        if self.horizon_T * self.v_max < self.trajectory_length:
            raise HorizonInfeasible(
                f"horizon infeasible: horizon_T*v_max = {self.horizon_T * self.v_max} "
                f"< trajectory_length = {self.trajectory_length}"
            )
        return self

    @property
    def low_ceiling(self) -> bool:
        """True when UAVs can never fly above the BS antenna (legal but odd)."""
        return self.h_max <= self.bs_height


def distance_uav_uav(a, b) -> float:
    return math.dist(a, b)


def distance_to_bs(p, bs_height: float) -> float:
    x, y, z = p
    return math.sqrt(x * x + y * y + (z - bs_height) ** 2)


def advance_position(u: UavState, speed: float, v_max: float | None = None) -> UavState:
    """Move ``u`` by ``speed`` metres along its trajectory direction."""
    if speed < 0 or (v_max is not None and speed > v_max * (1 + 1e-12)):
        raise DomainError(f"speed {speed} outside [0, {v_max}]")
    p = u.position
    d = u.direction
    pos = Vec3(p.x + speed * d.x, p.y + speed * d.y, p.z + speed * d.z)
    return dataclasses.replace(u, position=pos, progress=u.progress + speed)


def _stream(seed: int, kind: int, index: int) -> np.random.Generator:
    # One independent stream per entity, so adding UAVs leaves existing ones unchanged.
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(kind, index)))


def generate_scenario(cfg: ScenarioConfig) -> ScenarioState:
    cfg.validate()
    half_x, half_y = cfg.area_x / 2.0, cfg.area_y / 2.0
    uavs = []
    for i in range(cfg.n_uavs):
        rng = _stream(cfg.rng_seed, 0, i)
        x = rng.uniform(-half_x, half_x)
        y = rng.uniform(-half_y, half_y)
        z = rng.uniform(0.0, cfg.h_max)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        uavs.append(
            UavState(
                id=i,
                position=Vec3(float(x), float(y), float(z)),
                direction=Vec3(math.cos(heading), math.sin(heading), 0.0),
                trajectory_length=float(cfg.trajectory_length),
            )
        )
    cus = []
    for m in range(cfg.n_cus):
        rng = _stream(cfg.rng_seed, 1, m)
        x = rng.uniform(-half_x, half_x)
        y = rng.uniform(-half_y, half_y)
        cus.append(CuState(id=m, position=Vec3(float(x), float(y), float(cfg.cu_height))))
    return ScenarioState(uavs=tuple(uavs), cus=tuple(cus), bs_height=float(cfg.bs_height))


def nearest_relays(positions: np.ndarray, u2u: list[int], u2i: list[int]) -> dict[int, int]:
    """Pair each U2U UAV with its closest U2I UAV (ties: lowest index)."""
    pairing = {}
    for i in u2u:
        best, best_d = None, math.inf
        for j in sorted(u2i):
            d = distance_uav_uav(positions[i], positions[j])
            if d < best_d:
                best, best_d = j, d
        pairing[i] = best
    return pairing


def categorize_and_pair(
    s: ScenarioState,
    ch,
    snr_threshold_db: float = 10.0,
    n_u2u: int | None = None,
) -> ScenarioState:
    """Split UAVs into U2I/U2U by interference-free uplink SNR, then pair.

    With ``n_u2u`` set, the ``n_u2u`` lowest-SNR UAVs are labelled U2U
    regardless of the threshold (ties broken towards the lower index).
    """
    from .channel import u2i_received_power_w, dbm_to_w

    n = s.n_uavs
    if n == 0:
        return s.replace(u2i_set=(), u2u_set=(), pairing={})
    noise = dbm_to_w(ch.noise_dbm)
    snr_db = np.array(
        [10.0 * math.log10(u2i_received_power_w(u.position, s.bs_height, ch) / noise) for u in s.uavs]
    )
    if n_u2u is None:
        u2u = [i for i in range(n) if snr_db[i] < snr_threshold_db]
    else:
        if not 0 <= n_u2u <= n:
            raise ConfigError(f"n_u2u={n_u2u} outside [0, {n}]")
        order = sorted(range(n), key=lambda i: (snr_db[i], i))
        u2u = sorted(order[:n_u2u])
    u2i = [i for i in range(n) if i not in set(u2u)]
    if u2u and not u2i:
        raise CategorizationError(f"slot {s.slot}: {len(u2u)} U2U UAVs but no U2I relay")
    pairing = nearest_relays(s.uav_positions(), u2u, u2i)
    return s.replace(u2i_set=tuple(u2i), u2u_set=tuple(u2u), pairing=pairing)
