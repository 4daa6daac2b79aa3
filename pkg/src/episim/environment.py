"""Environment tree (root -> city -> zone -> location), vector patch grid, and transport.

Geometry lives on a flat plane in meters. Zones are axis-aligned rectangles
(optionally clipped by a polygon) and are tiled by square patch cells;
locations are points inside their zone with a rectangular footprint used by
the airborne contact model.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml
from shapely.geometry import Polygon, box

from .mobility import LocationCode, code_page, encode
from .rng import stream

logger = logging.getLogger(__name__)

ROOT, CITY, ZONE, LOCATION = "root", "city", "zone", "location"

DEFAULT_FOOTPRINT = (20.0, 20.0)
DEFAULT_TRAVEL = {"location_zone": 0, "zone_city": 10, "city_root": 15}


class ConfigError(ValueError):
    """Malformed environment, scenario, or progression document."""


@dataclass
class EnvNode:
    node_id: int
    kind: str
    name: str
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    zone_class: str | None = None
    rect: tuple[float, float, float, float] | None = None  # x, y, w, h
    geometry: Polygon | None = None
    position: tuple[float, float] | None = None
    footprint: tuple[float, float] | None = None
    location_kind: str | None = None
    code: LocationCode | None = None
    code_page: tuple[int, int] = (0, 0)  # (zone page, location page) when indices overflow 3 bits
    depth: int = 0


@dataclass
class Patch:
    patch_id: int
    zone: int  # node id of the owning zone
    cell: tuple[float, float, float, float]  # x0, y0, x1, y1
    area: float
    partial: bool
    K_v: float
    temperature_C: float
    rainfall_mm: float = 0.0
    humidity_pct: float = 0.0

    @property
    def centroid(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.cell
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))


@dataclass(frozen=True)
class TransportConfig:
    intracity_headway: int = 15
    intercity_headway: int = 60
    bus_capacity: int = 40
    taxi_capacity: int = 4
    bus_footprint: tuple[float, float] = (10.0, 2.5)
    taxi_footprint: tuple[float, float] = (2.0, 1.5)


class Environment:
    """Immutable environment tree plus derived lookup tables.

    ``locations`` lists location node ids in place order: place index ``i``
    refers to node ``locations[i]``. Vehicles get place indices after the
    last location (see :class:`Transport`).
    """

    def __init__(
        self,
        nodes: list[EnvNode],
        patches: list[Patch],
        travel: dict[str, float],
        transport: TransportConfig,
    ):
        self.nodes = nodes
        self.root = 0
        self.patches = patches
        self.travel = dict(travel)
        self.transport = transport
        self.by_name = {n.name: n.node_id for n in nodes}
        self.locations = [n.node_id for n in nodes if n.kind == LOCATION]
        self.place_of = {nid: i for i, nid in enumerate(self.locations)}
        self.cities = [n.node_id for n in nodes if n.kind == CITY]
        self.zones = [n.node_id for n in nodes if n.kind == ZONE]
        self.location_kind = np.array([nodes[n].location_kind for n in self.locations], dtype=object)
        self.location_zone = np.array([nodes[n].parent for n in self.locations], dtype=np.int64)
        self.location_city = np.array([nodes[nodes[n].parent].parent for n in self.locations],
                                      dtype=np.int64)
        self.footprints = np.array([nodes[n].footprint for n in self.locations], dtype=float)
        self.positions = np.array([nodes[n].position for n in self.locations], dtype=float)
        self.patch_zone = np.array([p.zone for p in patches], dtype=np.int64)
        self.patch_centroids = np.array([p.centroid for p in patches], dtype=float).reshape(-1, 2)
        self.location_patch = self._map_patches()

    def __len__(self):
        return len(self.nodes)

    def node(self, key: int | str) -> EnvNode:
        return self.nodes[self.by_name[key] if isinstance(key, str) else key]

    def city_of(self, node_id: int) -> int | None:
        n = self.nodes[node_id]
        while n.kind not in (CITY, ROOT):
            n = self.nodes[n.parent]
        return n.node_id if n.kind == CITY else None

    def zone_of(self, node_id: int) -> int | None:
        n = self.nodes[node_id]
        if n.kind == LOCATION:
            return n.parent
        return node_id if n.kind == ZONE else None

    def places_of_kind(self, kind: str) -> np.ndarray:
        return np.flatnonzero(self.location_kind == kind)

    def zone_patches(self, zone_id: int) -> np.ndarray:
        return np.flatnonzero(self.patch_zone == zone_id)

    def _map_patches(self) -> np.ndarray:
        out = np.full(len(self.locations), -1, dtype=np.int64)
        for zone in self.zones:
            ids = self.zone_patches(zone)
            if not len(ids):
                continue
            cells = np.array([self.patches[i].cell for i in ids])
            for place in np.flatnonzero(self.location_zone == zone):
                x, y = self.positions[place]
                inside = (cells[:, 0] <= x) & (x <= cells[:, 2]) & (cells[:, 1] <= y) & (y <= cells[:, 3])
                hit = np.flatnonzero(inside)
                if len(hit):
                    out[place] = ids[hit[0]]
                else:  # polygon-clipped zone: nearest cell centre
                    c = 0.5 * (cells[:, :2] + cells[:, 2:])
                    out[place] = ids[int(np.argmin(((c - (x, y)) ** 2).sum(axis=1)))]
        return out

    # -- paths -------------------------------------------------------------

    def route(self, a: int | str, b: int | str) -> list[int]:
        """Tree path from ``a`` up to the lowest common ancestor and down to ``b``."""
        a = self.by_name[a] if isinstance(a, str) else a
        b = self.by_name[b] if isinstance(b, str) else b
        up, down = [a], [b]
        x, y = a, b
        while self.nodes[x].depth > self.nodes[y].depth:
            x = self.nodes[x].parent
            up.append(x)
        while self.nodes[y].depth > self.nodes[x].depth:
            y = self.nodes[y].parent
            down.append(y)
        while x != y:
            x, y = self.nodes[x].parent, self.nodes[y].parent
            up.append(x)
            down.append(y)
        return up + down[-2::-1]

    def edge_minutes(self, a: int, b: int) -> float:
        kinds = {self.nodes[a].kind, self.nodes[b].kind}
        if kinds == {LOCATION, ZONE}:
            return self.travel["location_zone"]
        if kinds == {ZONE, CITY}:
            return self.travel["zone_city"]
        if kinds == {CITY, ROOT}:
            return self.travel["city_root"]
        raise ValueError(f"nodes {a} and {b} are not adjacent")

    def travel_minutes(self, a: int, b: int) -> float:
        path = self.route(a, b)
        return float(sum(self.edge_minutes(u, v) for u, v in zip(path, path[1:])))

    def nearest_patches(self, place: int, count: int) -> np.ndarray:
        d = ((self.patch_centroids - self.positions[place]) ** 2).sum(axis=1)
        return np.argsort(d, kind="stable")[:count]


# ---------------------------------------------------------------------------
# building from a config document


def _pair(value, where: str) -> tuple[float, float]:
    try:
        a, b = value
        return (float(a), float(b))
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a pair of numbers, got {value!r}") from None


def _tile(rect, geometry: Polygon | None, cell: float):
    x, y, w, h = rect
    nx, ny = math.ceil(w / cell - 1e-9), math.ceil(h / cell - 1e-9)
    for j in range(ny):
        for i in range(nx):
            x0, y0 = x + i * cell, y + j * cell
            x1, y1 = min(x0 + cell, x + w), min(y0 + cell, y + h)
            area = (x1 - x0) * (y1 - y0)
            if geometry is not None:
                area = geometry.intersection(box(x0, y0, x1, y1)).area
                if area <= 0:
                    continue
            yield (x0, y0, x1, y1), area, area < cell * cell - 1e-6


def build_tree(config: dict[str, Any], root_name: str = "root") -> Environment:
    """Build the environment from a parsed config mapping.

    Keys: ``cities`` (names), ``zones`` (name, city, class, rect and optional
    polygon, optional ``generate: {kind: count}``), ``locations`` (name, zone,
    kind, optional position/footprint), ``footprints`` (per location kind),
    ``transport``, ``patches`` (cell_m, K_v range, climate), ``seed``.
    """
    if not isinstance(config, dict):
        raise ConfigError("environment: expected a mapping")
    seed = int(config.get("seed", 0))
    footprints = {k: _pair(v, f"footprints.{k}") for k, v in (config.get("footprints") or {}).items()}
    nodes = [EnvNode(0, ROOT, root_name)]
    names = {root_name: 0}

    def add(kind, name, parent, where, **kw):
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{where}.name: missing")
        if name in names:
            raise ConfigError(f"{where}.name: duplicate node name {name!r}")
        node = EnvNode(len(nodes), kind, name, parent, depth=nodes[parent].depth + 1, **kw)
        nodes.append(node)
        nodes[parent].children.append(node.node_id)
        names[name] = node.node_id
        return node

    cities = config.get("cities") or []
    if not cities:
        raise ConfigError("cities: at least one city is required")
    for i, c in enumerate(cities):
        name = c["name"] if isinstance(c, dict) else c
        add(CITY, name, 0, f"cities[{i}]")

    zone_index = 0
    pending: dict[int, list[dict]] = {}
    for i, z in enumerate(config.get("zones") or []):
        where = f"zones[{i}]"
        city = z.get("city")
        if city not in names or nodes[names[city]].kind != CITY:
            raise ConfigError(f"{where}.city: unknown city {city!r} (orphan zone)")
        if "rect" not in z:
            raise ConfigError(f"{where}.rect: missing")
        rect = tuple(float(v) for v in z["rect"])
        if len(rect) != 4 or rect[2] <= 0 or rect[3] <= 0:
            raise ConfigError(f"{where}.rect: expected [x, y, w, h] with positive size")
        geom = Polygon(z["polygon"]) if z.get("polygon") else None
        page, bits = code_page(zone_index)
        node = add(ZONE, z.get("name"), names[city], where, zone_class=z.get("class", "other"),
                   rect=rect, geometry=geom)
        node.code_page = (page, 0)
        node.code = encode(bits, 0)
        zone_index += 1
        pending[node.node_id] = []
        for kind, count in sorted((z.get("generate") or {}).items()):
            for k in range(int(count)):
                pending[node.node_id].append({"name": f"{node.name}/{kind}-{k:03d}", "kind": kind})

    for i, loc in enumerate(config.get("locations") or []):
        where = f"locations[{i}]"
        zone = loc.get("zone")
        if zone not in names or nodes[names[zone]].kind != ZONE:
            raise ConfigError(f"{where}.zone: unknown zone {zone!r} (orphan location)")
        if not loc.get("kind"):
            raise ConfigError(f"{where}.kind: missing")
        pending[names[zone]].append(dict(loc, _where=where))

    for zid, locs in pending.items():
        zone = nodes[zid]
        rng = stream(seed, "layout", zone.name)
        x, y, w, h = zone.rect
        for j, loc in enumerate(locs):
            where = loc.get("_where", f"{zone.name}.generate")
            kind = loc["kind"]
            if "position" in loc:
                pos = _pair(loc["position"], f"{where}.position")
                if not (x <= pos[0] <= x + w and y <= pos[1] <= y + h):
                    raise ConfigError(f"{where}.position: outside zone {zone.name!r}")
            else:
                pos = (x + w * (0.05 + 0.9 * rng.random()), y + h * (0.05 + 0.9 * rng.random()))
            fp = _pair(loc["footprint"], f"{where}.footprint") if "footprint" in loc else \
                footprints.get(kind, footprints.get("default", DEFAULT_FOOTPRINT))
            lpage, lbits = code_page(j)
            node = add(LOCATION, loc.get("name"), zid, where, position=pos, footprint=fp,
                       location_kind=kind, zone_class=zone.zone_class)
            node.code = encode(zone.code.zone_bits, lbits)
            node.code_page = (zone.code_page[0], lpage)

    for c in nodes:
        if c.kind == CITY and not c.children:
            logger.warning("city %s has no zones", c.name)

    pconf = config.get("patches") or {}
    cell = float(pconf.get("cell_m", 500.0))
    if cell <= 0:
        raise ConfigError("patches.cell_m: must be positive")
    kv = pconf.get("K_v", [100, 200])
    kv_lo, kv_hi = (float(kv), float(kv)) if np.isscalar(kv) else _pair(kv, "patches.K_v")
    climate = dict(pconf.get("climate") or {})
    zone_climate = pconf.get("zone_climate") or {}
    for name in zone_climate:
        if name not in names or nodes[names[name]].kind != ZONE:
            raise ConfigError(f"patches.zone_climate: unknown zone {name!r}")
    patches = []
    for zid in (n.node_id for n in nodes if n.kind == ZONE):
        zone = nodes[zid]
        cl = dict(climate, **(zone_climate.get(zone.name) or {}))
        rng = stream(seed, "patches", zone.name)
        for rect, area, partial in _tile(zone.rect, zone.geometry, cell):
            patches.append(Patch(
                len(patches), zid, rect, area, partial,
                K_v=float(kv_lo + (kv_hi - kv_lo) * rng.random()),
                temperature_C=float(cl.get("temperature_C", 27.0)),
                rainfall_mm=float(cl.get("rainfall_mm", 0.0)),
                humidity_pct=float(cl.get("humidity_pct", 0.0)),
            ))

    tconf = config.get("transport") or {}
    travel = dict(DEFAULT_TRAVEL, **(tconf.get("travel_minutes") or {}))
    bus, taxi = tconf.get("bus") or {}, tconf.get("taxi") or {}
    transport = TransportConfig(
        intracity_headway=int(bus.get("intracity_headway", 15)),
        intercity_headway=int(bus.get("intercity_headway", 60)),
        bus_capacity=int(bus.get("capacity", 40)),
        taxi_capacity=int(taxi.get("capacity", 4)),
        bus_footprint=_pair(bus.get("footprint", (10.0, 2.5)), "transport.bus.footprint"),
        taxi_footprint=_pair(taxi.get("footprint", (2.0, 1.5)), "transport.taxi.footprint"),
    )
    if min(transport.intracity_headway, transport.intercity_headway) <= 0:
        raise ConfigError("transport.bus: headways must be positive")
    if min(transport.bus_capacity, transport.taxi_capacity) <= 0:
        raise ConfigError("transport: capacities must be positive")
    return Environment(nodes, patches, travel, transport)


def load_environment(path: str | Path) -> Environment:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return build_tree(doc)


def builtin_environment_path() -> Path:
    return Path(__file__).parent / "data" / "kandy.yaml"


# ---------------------------------------------------------------------------
# transport


PRIVATE, BUS, TAXI = "private", "bus", "taxi"


@dataclass
class Leg:
    agent: int
    start: int  # first travel minute
    end: int  # first minute at the destination
    origin: int  # place index
    dest: int
    mode: str = PRIVATE
    vehicle: int = -1  # vehicle index within the day, -1 when private
    board: int = -1  # minute the agent boards


@dataclass
class Vehicle:
    vehicle_id: int
    kind: str  # intracity_bus, intercity_bus, taxi
    route: list[int]  # env node ids the vehicle cycles through
    capacity: int
    departure: int
    occupants: list[int] = field(default_factory=list)
    position: int | None = None


def plan_day_route(
    agent: int,
    stays: Sequence[tuple[int, int, int]],
    public_prob: float,
    taxi_share: float,
    rng: np.random.Generator,
) -> list[Leg]:
    """Legs between consecutive distinct places.

    ``stays`` are (place, start, duration) with ``place = -1`` for travel
    minutes. A leg spans the travel gap between two different places (an
    immediate switch gives a zero-length leg, which is dropped). Each leg
    goes public with probability ``public_prob``; public legs take a taxi
    with probability ``taxi_share``, otherwise a bus. Exactly two uniforms
    are drawn per leg so the stream stays aligned across scenarios.
    """
    legs = []
    prev_place, prev_end = None, None
    for place, start, dur in stays:
        if place < 0:
            continue
        if prev_place is not None and place != prev_place and start > prev_end:
            u_public, u_taxi = rng.random(2)
            mode = PRIVATE
            if u_public < public_prob:
                mode = TAXI if u_taxi < taxi_share else BUS
            legs.append(Leg(agent, prev_end, start, prev_place, place, mode))
        prev_place, prev_end = place, start + dur
    return legs


class Transport:
    """Assigns public legs to vehicles for one day.

    Bus trips are identified by (route, departure slot): an intracity route
    serves every zone of one city, an intercity route links two cities.
    A passenger rides the first trip departing at or after the leg start with
    a free seat and stays aboard until the leg ends; if no trip departs before
    the leg ends the agent travels privately. Taxis are dispatched on demand
    and shared by legs with the same origin zone, destination zone, and start
    minute.
    """

    def __init__(self, env: Environment):
        self.env = env
        self.cfg = env.transport
        self.vehicles: list[Vehicle] = []
        self.fallbacks = 0
        self._legs: list[Leg] = []

    def assign(self, legs: Iterable[Leg]) -> list[Leg]:
        env, cfg = self.env, self.cfg
        self.vehicles, self.fallbacks = [], 0
        trips: dict[tuple, int] = {}
        taxis: dict[tuple, list[int]] = {}
        out = []
        for leg in sorted(legs, key=lambda l: (l.start, l.agent, l.origin)):
            if leg.mode == PRIVATE:
                out.append(leg)
                continue
            oz, dz = int(env.location_zone[leg.origin]), int(env.location_zone[leg.dest])
            if oz == dz:
                leg.mode = PRIVATE  # within a zone people walk
                out.append(leg)
                continue
            if leg.mode == TAXI:
                key = (oz, dz, leg.start)
                pool = taxis.setdefault(key, [])
                if not pool or len(self.vehicles[pool[-1]].occupants) >= cfg.taxi_capacity:
                    v = Vehicle(len(self.vehicles), "taxi", env.route(oz, dz), cfg.taxi_capacity, leg.start)
                    self.vehicles.append(v)
                    pool.append(v.vehicle_id)
                v = self.vehicles[pool[-1]]
                v.occupants.append(leg.agent)
                leg.vehicle, leg.board = v.vehicle_id, leg.start
                out.append(leg)
                continue
            oc, dc = int(env.location_city[leg.origin]), int(env.location_city[leg.dest])
            if oc == dc:
                kind, route, headway = "intracity_bus", ("city", oc), cfg.intracity_headway
                stops = [z for z in env.nodes[oc].children]
            else:
                kind, route, headway = "intercity_bus", ("link",) + tuple(sorted((oc, dc))), cfg.intercity_headway
                stops = env.route(min(oc, dc), max(oc, dc))
            slot = -(-leg.start // headway) * headway
            while slot < leg.end:
                vid = trips.get(route + (slot,))
                if vid is None:
                    v = Vehicle(len(self.vehicles), kind, list(stops), cfg.bus_capacity, slot)
                    self.vehicles.append(v)
                    trips[route + (slot,)] = vid = v.vehicle_id
                if len(self.vehicles[vid].occupants) < cfg.bus_capacity:
                    break
                slot += headway
            if slot >= leg.end:
                logger.debug("no bus seat for agent %d at minute %d; travelling privately",
                             leg.agent, leg.start)
                self.fallbacks += 1
                leg.mode = PRIVATE
            else:
                self.vehicles[vid].occupants.append(leg.agent)
                leg.vehicle, leg.board = vid, slot
            out.append(leg)
        self._legs = out
        return out

    def step_vehicles(self, minute: int) -> dict[int, tuple[int, list[int]]]:
        """Vehicle positions and aboard occupants at ``minute``.

        Buses move one stop per configured zone-to-city hop; only vehicles
        with somebody aboard at ``minute`` are reported.
        """
        aboard: dict[int, list[int]] = {}
        for leg in self._legs:
            if leg.vehicle >= 0 and leg.board <= minute < leg.end:
                aboard.setdefault(leg.vehicle, []).append(leg.agent)
        hop = max(1.0, float(self.env.travel["zone_city"]))
        out = {}
        for vid in sorted(aboard):
            v = self.vehicles[vid]
            k = int((minute - v.departure) // hop) % max(1, len(v.route))
            v.position = v.route[k]
            out[vid] = (v.position, sorted(aboard[vid]))
        return out

    def footprints(self) -> np.ndarray:
        cfg = self.cfg
        fp = [cfg.taxi_footprint if v.kind == "taxi" else cfg.bus_footprint for v in self.vehicles]
        return np.array(fp, dtype=float).reshape(-1, 2)
