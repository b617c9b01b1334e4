import dataclasses
import math

import numpy as np
import pytest

from uav2x.channel import ChannelParams
from uav2x.errors import CategorizationError, ConfigError, DomainError, HorizonInfeasible
from uav2x.scenario import (
    ScenarioConfig,
    ScenarioState,
    UavState,
    Vec3,
    advance_position,
    categorize_and_pair,
    distance_to_bs,
    distance_uav_uav,
    generate_scenario,
)

P = ChannelParams()


def uav(i, x, y, z, direction=(1.0, 0.0, 0.0)):
    return UavState(i, Vec3(x, y, z), Vec3(*direction), 300.0)


def test_distances():
    assert distance_uav_uav((0, 0, 0), (0, 0, 0)) == 0.0
    assert distance_uav_uav((0, 0, 0), (3, 4, 0)) == 5.0
    # mpmath: sqrt(300^2 + 400^2 + 50^2)
    assert distance_uav_uav((100, 200, 150), (400, -200, 100)) == pytest.approx(502.4937810560445, rel=1e-14)
    assert distance_to_bs((0, 0, 25), 25) == 0.0
    assert distance_to_bs((0, 300, 25), 25) == 300.0
    assert distance_to_bs((1000, 1000, 100), 25) == pytest.approx(1416.2009038268546, rel=1e-14)


def test_advance_position():
    u = uav(0, 10.0, 20.0, 50.0)
    assert advance_position(u, 0.0).position == u.position
    moved = advance_position(u, 10.0, v_max=10.0)
    assert moved.position.x == 20.0 and moved.position.y == 20.0
    assert moved.progress - u.progress == 10.0
    d = (math.cos(1.0), math.sin(1.0), 0.0)
    v = advance_position(uav(1, 0.0, 0.0, 0.0, d), 7.5)
    assert math.dist(v.position, (0, 0, 0)) == pytest.approx(7.5, rel=1e-15)
    with pytest.raises(DomainError):
        advance_position(u, 11.0, v_max=10.0)
    with pytest.raises(DomainError):
        advance_position(u, -1.0)


def test_generate_deterministic_and_shaped():
    cfg = ScenarioConfig(rng_seed=42)
    a, b = generate_scenario(cfg), generate_scenario(cfg)
    assert a == b
    assert len(a.uavs) == 20 and len(a.cus) == 5
    for u in a.uavs:
        assert abs(u.position.x) <= 1000 and abs(u.position.y) <= 1000 and 0 <= u.position.z <= 200
        assert math.hypot(u.direction.x, u.direction.y) == pytest.approx(1.0, abs=1e-12)
        assert u.direction.z == 0.0
    assert all(c.position.z == 1.5 for c in a.cus)
    assert generate_scenario(dataclasses.replace(cfg, n_uavs=0)).uavs == ()


def test_adding_uavs_keeps_existing_ones():
    small = generate_scenario(ScenarioConfig(n_uavs=5, rng_seed=3))
    big = generate_scenario(ScenarioConfig(n_uavs=9, rng_seed=3))
    assert big.uavs[:5] == small.uavs


def test_generated_positions_centered():
    s = generate_scenario(ScenarioConfig(n_uavs=10_000, n_cus=0, rng_seed=1))
    x = s.uav_positions()[:, 0]
    # uniform on [-1000, 1000]: sigma of the mean is 2000 / sqrt(12 n)
    assert abs(x.mean()) < 3 * 2000 / math.sqrt(12 * len(x))


def test_infeasible_horizon_rejected():
    with pytest.raises(HorizonInfeasible):
        generate_scenario(ScenarioConfig(horizon_T=20, v_max=10, trajectory_length=300))
    with pytest.raises(ConfigError):
        ScenarioConfig(n_uavs=-1).validate()


def test_overhead_uavs_all_u2i():
    uavs = tuple(uav(i, 0.0, 0.0, 25.0 + 100.0) for i in range(3))
    s = ScenarioState(uavs, (), 25.0)
    out = categorize_and_pair(s, P, 10.0)
    assert out.u2i_set == (0, 1, 2) and out.u2u_set == () and out.pairing == {}


def test_pairing_rules():
    near = uav(0, 0.0, 0.0, 150.0)
    far1 = uav(1, 1000.0, 1000.0, 5.0)
    far2 = uav(2, -1000.0, 1000.0, 5.0)
    s = ScenarioState((near, far1, far2), (), 25.0)
    out = categorize_and_pair(s, P, 40.0)
    assert set(out.u2u_set) | set(out.u2i_set) == {0, 1, 2}
    forced = categorize_and_pair(s, P, 10.0, n_u2u=2)
    assert forced.u2i_set == (0,) and forced.pairing == {1: 0, 2: 0}


def test_equidistant_relays_lowest_index():
    a = uav(0, -100.0, 0.0, 150.0)
    b = uav(1, 100.0, 0.0, 150.0)
    low = uav(2, 0.0, 900.0, 150.0)
    s = ScenarioState((a, b, low), (), 25.0)
    out = categorize_and_pair(s, P, 10.0, n_u2u=1)
    assert out.u2u_set == (2,) and out.pairing == {2: 0}


def test_no_relay_is_error():
    s = ScenarioState((uav(0, 900.0, 900.0, 1.0),), (), 25.0)
    with pytest.raises(CategorizationError):
        categorize_and_pair(s, P, 200.0)


def test_partition_and_argmin_pairing():
    s = generate_scenario(ScenarioConfig(n_uavs=15, rng_seed=11))
    out = categorize_and_pair(s, P, 10.0, n_u2u=5)
    assert sorted(out.u2i_set + out.u2u_set) == list(range(15))
    pos = out.uav_positions()
    for i, j in out.pairing.items():
        assert j in out.u2i_set
        best = min(out.u2i_set, key=lambda r: (np.linalg.norm(pos[i] - pos[r]), r))
        assert j == best
