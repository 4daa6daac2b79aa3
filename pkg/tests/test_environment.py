import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from episim.environment import (
    BUS,
    PRIVATE,
    TAXI,
    ConfigError,
    Leg,
    Transport,
    build_tree,
    builtin_environment_path,
    load_environment,
    plan_day_route,
)


def test_node_count(small_env_config):
    env = build_tree(small_env_config)
    assert len(env) == 1 + 1 + 2 + 6


def test_kandy_loads():
    env = load_environment(builtin_environment_path())
    names = {env.nodes[c].name for c in env.cities}
    assert names == {"Kandy", "Pallekele", "Gampola"}
    assert len(env.places_of_kind("home")) > 0


def test_patch_tiling(small_env_config):
    env = build_tree(small_env_config)
    res = env.by_name["res"]
    assert len(env.zone_patches(res)) == 4


def test_partial_patches_cover_area():
    cfg = {"cities": ["C"], "zones": [{"name": "z", "city": "C", "rect": [0, 0, 1200, 700]}]}
    env = build_tree(cfg)
    areas = [p.area for p in env.patches]
    assert sum(areas) == pytest.approx(1200 * 700)
    assert sum(p.partial for p in env.patches) == 4  # 3x2 cells, four clipped


def test_polygon_zone_clips_patches():
    cfg = {"cities": ["C"], "zones": [{"name": "z", "city": "C", "rect": [0, 0, 1000, 1000],
                                       "polygon": [[0, 0], [1000, 0], [0, 1000]]}]}
    env = build_tree(cfg)
    assert sum(p.area for p in env.patches) == pytest.approx(500000)


def test_route_examples(small_env_config):
    env = build_tree(small_env_config)
    n = env.by_name
    assert env.route("home-a", "home-a") == [n["home-a"]]
    assert env.route("home-a", "school") == [n["home-a"], n["res"], n["Alpha"], n["work"], n["school"]]


def test_cross_city_route_has_root():
    env = load_environment(builtin_environment_path())
    path = [env.nodes[i].name for i in env.route("kandy-school-1", "gampola-farm-1")]
    assert "Kandy" in path and "Gampola" in path and "root" in path


@given(st.integers(0, 539), st.integers(0, 539))
def test_route_reverses(a, b):
    env = _kandy()
    la, lb = env.locations[a], env.locations[b]
    assert env.route(la, lb) == env.route(lb, la)[::-1]


_ENV = []


def _kandy():
    if not _ENV:
        _ENV.append(load_environment(builtin_environment_path()))
    return _ENV[0]


def test_travel_minutes_default():
    env = _kandy()
    assert env.travel_minutes(env.by_name["kandy-res-north"], env.by_name["Kandy"]) == 10
    # city to city through the root: 15 + 15
    assert env.travel_minutes(env.by_name["Kandy"], env.by_name["Gampola"]) == 30


def test_config_errors(small_env_config):
    bad = dict(small_env_config, locations=small_env_config["locations"] + [{"name": "x", "zone": "nowhere", "kind": "bank"}])
    with pytest.raises(ConfigError, match="orphan"):
        build_tree(bad)
    dup = dict(small_env_config, locations=small_env_config["locations"] + [{"name": "bank", "zone": "work", "kind": "bank"}])
    with pytest.raises(ConfigError, match="duplicate"):
        build_tree(dup)
    with pytest.raises(ConfigError):
        build_tree({"cities": []})


def test_plan_day_route_counts():
    rng = np.random.default_rng(0)
    assert plan_day_route(0, [(3, 0, 1440)], 1.0, 0.0, rng) == []
    stays = [(0, 0, 480), (-1, 480, 20), (5, 500, 400), (-1, 900, 20), (0, 920, 520)]
    legs = plan_day_route(0, stays, 0.0, 0.0, rng)
    assert len(legs) == 2 and all(l.mode == PRIVATE for l in legs)
    assert (legs[0].start, legs[0].end, legs[0].origin, legs[0].dest) == (480, 500, 0, 5)


def test_public_preference_uses_bus():
    env = _kandy()
    home = int(env.places_of_kind("home")[0])
    school = int(np.flatnonzero([env.nodes[n].name == "kandy-school-1" for n in env.locations])[0])
    stays = [(home, 0, 420), (-1, 420, 60), (school, 480, 420), (-1, 900, 60), (home, 960, 480)]
    legs = plan_day_route(0, stays, 1.0, 0.0, np.random.default_rng(0))
    assert [l.mode for l in legs] == [BUS, BUS]
    t = Transport(env)
    out = t.assign(legs)
    assert all(l.mode == BUS and l.vehicle >= 0 for l in out)
    assert all(t.vehicles[l.vehicle].kind == "intracity_bus" for l in out)


def test_bus_capacity_never_exceeded():
    env = _kandy()
    homes = env.places_of_kind("home")
    farm = int(np.flatnonzero(env.location_kind == "farm")[0])
    legs = [Leg(a, 400, 520, int(homes[a % len(homes)]), farm, BUS) for a in range(150)]
    t = Transport(env)
    out = t.assign(legs)
    counts = np.bincount([l.vehicle for l in out if l.vehicle >= 0])
    assert counts.max() <= env.transport.bus_capacity
    # riders who found no seat before the leg ended travel privately
    assert all((l.vehicle >= 0) == (l.mode == BUS) for l in out)
    for l in out:
        if l.vehicle >= 0:
            assert l.board >= l.start and l.board < l.end


def test_shared_taxi_copresence_and_empty_bus():
    env = _kandy()
    homes = env.places_of_kind("home")
    bank = int(np.flatnonzero(env.location_kind == "bank")[0])
    h = int(homes[0])
    legs = [Leg(1, 600, 630, h, bank, TAXI), Leg(2, 600, 630, h, bank, TAXI)]
    t = Transport(env)
    out = t.assign(legs)
    assert out[0].vehicle == out[1].vehicle
    aboard = t.step_vehicles(610)
    assert aboard[out[0].vehicle][1] == [1, 2]
    assert t.step_vehicles(700) == {}


def test_vehicle_riders_are_nowhere_else():
    env = _kandy()
    homes = env.places_of_kind("home")
    school = int(env.places_of_kind("school")[0])
    legs = [Leg(a, 420, 480, int(homes[a]), school, BUS) for a in range(10)]
    t = Transport(env)
    out = t.assign(legs)
    for m in range(420, 480):
        riders = [a for _, (_, occ) in t.step_vehicles(m).items() for a in occ]
        assert len(riders) == len(set(riders))
