"""GPS traces to a labeled, minute-resolution time-location dataset.

Pipeline per participant: zero-order-hold upsampling, DBSCAN stay-region
detection on locally projected coordinates, gazetteer labeling of regions,
and splitting into complete local-midnight days. Minutes whose sample does
not fall in any stay region are coded ``IN_TRANSIT``.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import yaml
from scipy.spatial import cKDTree
from shapely.geometry import Point, Polygon

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
EARTH_RADIUS_M = 6371008.8

# numeric sentinels sit just above the 6-bit code space
IN_TRANSIT = 64
UNKNOWN = 65
IN_TRANSIT_LABEL = "IN_TRANSIT"
UNKNOWN_LABEL = "UNKNOWN"
NOISE = -1


class TraceError(ValueError):
    """A GPS trace violates an ordering or cadence precondition."""


@dataclass(frozen=True, order=True)
class LocationCode:
    zone_bits: int
    location_bits: int

    def __post_init__(self):
        for name in ("zone_bits", "location_bits"):
            v = getattr(self, name)
            if not 0 <= v < 8:
                raise ValueError(f"{name}={v} does not fit in 3 bits")

    @property
    def value(self) -> int:
        return self.zone_bits * 8 + self.location_bits

    def __str__(self) -> str:
        return format(self.value, "06b")


def encode(zone_index: int, location_index: int) -> LocationCode:
    """Pack a zone and a location index into a 6-bit code.

    Both indices must be below 8; wider environments need a second code page
    (see :func:`code_page`).
    """
    if not (0 <= zone_index < 8 and 0 <= location_index < 8):
        raise ValueError(
            f"index out of range for 3+3-bit code: zone={zone_index}, location={location_index}"
        )
    return LocationCode(zone_index, location_index)


def decode(code: LocationCode | int | str) -> tuple[int, int]:
    if isinstance(code, LocationCode):
        return code.zone_bits, code.location_bits
    if isinstance(code, str):
        if len(code) != 6 or set(code) - {"0", "1"}:
            raise ValueError(f"not a 6-digit binary code: {code!r}")
        code = int(code, 2)
    if not 0 <= code < 64:
        raise ValueError(f"code {code} outside the 6-bit range")
    return code // 8, code % 8


def code_page(index: int) -> tuple[int, int]:
    """Split an unbounded index into (page, 3-bit index)."""
    return index // 8, index % 8


def code_to_str(value: int) -> str:
    if value == IN_TRANSIT:
        return IN_TRANSIT_LABEL
    if value == UNKNOWN:
        return UNKNOWN_LABEL
    return format(value, "06b")


def str_to_code(text: str) -> int:
    if text == IN_TRANSIT_LABEL:
        return IN_TRANSIT
    if text == UNKNOWN_LABEL:
        return UNKNOWN
    return int(text, 2)


@dataclass(frozen=True)
class GpsPoint:
    participant_id: str
    timestamp: datetime
    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range")


@dataclass(frozen=True)
class TimeLocationRecord:
    participant_id: str
    day_index: int
    minute: int
    location: int
    label: str


@dataclass
class StayRegion:
    region_id: int
    centroid: tuple[float, float]  # lat, lon
    member_points: list[int]
    label: str | None = None
    code: int | None = None


@dataclass
class LocationDay:
    """One complete participant-day: 1440 numeric location codes."""

    participant_id: str
    day_index: int
    day_type: str
    codes: np.ndarray
    labels: dict[int, str] = field(default_factory=dict)
    date: date | None = None

    def records(self) -> Iterator[TimeLocationRecord]:
        for minute, c in enumerate(self.codes.tolist()):
            yield TimeLocationRecord(
                self.participant_id, self.day_index, minute, c, self.label_of(c)
            )

    def label_of(self, code: int) -> str:
        if code == IN_TRANSIT:
            return IN_TRANSIT_LABEL
        if code == UNKNOWN:
            return UNKNOWN_LABEL
        return self.labels.get(code, code_to_str(code))


def day_type_of(d: date) -> str:
    return "weekend" if d.weekday() >= 5 else "weekday"


# ---------------------------------------------------------------------------
# upsampling


def _abs_minute(ts: datetime) -> int:
    return ts.toordinal() * MINUTES_PER_DAY + ts.hour * 60 + ts.minute


def _check_order(points: Sequence[GpsPoint]) -> np.ndarray:
    minutes = np.array([_abs_minute(p.timestamp) for p in points], dtype=np.int64)
    for i in range(1, len(points)):
        if points[i].timestamp <= points[i - 1].timestamp:
            raise TraceError(
                f"participant {points[i].participant_id}: timestamp {points[i].timestamp} "
                f"at index {i} does not follow {points[i - 1].timestamp}"
            )
        if minutes[i] == minutes[i - 1]:
            raise TraceError(
                f"participant {points[i].participant_id}: samples {i - 1} and {i} "
                "fall in the same minute (cadence below 1 min)"
            )
    return minutes


def zoh_indices(minutes: np.ndarray, through_day_end: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Hold-index map for a sorted array of absolute sample minutes.

    Returns ``(grid, source)``: every absolute minute covered by the output
    and the index of the sample held at that minute.
    """
    if len(minutes) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    end = int(minutes[-1])
    if through_day_end:
        end = (end // MINUTES_PER_DAY + 1) * MINUTES_PER_DAY - 1
    grid = np.arange(int(minutes[0]), end + 1, dtype=np.int64)
    source = np.searchsorted(minutes, grid, side="right") - 1
    return grid, source


def zoh_upsample(points: Sequence[GpsPoint], through_day_end: bool = False) -> list[GpsPoint]:
    """Zero-order-hold a trace onto a 1-minute grid.

    Each sample is held for every minute in ``[t_i, t_{i+1})``. The output
    stops at the final sample unless ``through_day_end`` is set, in which case
    the final sample is held to 23:59 of its day.
    """
    if not points:
        return []
    minutes = _check_order(points)
    grid, source = zoh_indices(minutes, through_day_end)
    t0 = points[0].timestamp.replace(second=0, microsecond=0)
    out = []
    for k, (g, s) in enumerate(zip(grid.tolist(), source.tolist())):
        p = points[s]
        out.append(GpsPoint(p.participant_id, t0 + timedelta(minutes=g - int(minutes[0])),
                            p.lat, p.lon, p.alt))
    return out


# ---------------------------------------------------------------------------
# clustering


def project(lat, lon, origin: tuple[float, float]) -> np.ndarray:
    """Equirectangular projection to local meters about ``origin`` (lat, lon)."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    lat0, lon0 = origin
    x = np.radians(lon - lon0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    y = np.radians(lat - lat0) * EARTH_RADIUS_M
    return np.column_stack([x, y])


def unproject(xy: np.ndarray, origin: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    lat0, lon0 = origin
    xy = np.atleast_2d(xy)
    lat = lat0 + np.degrees(xy[:, 1] / EARTH_RADIUS_M)
    lon = lon0 + np.degrees(xy[:, 0] / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return lat, lon


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering of planar points.

    A point is core when its closed eps-ball holds at least ``min_pts`` points
    (itself included). Clusters are the connected components of the core
    graph, numbered by their lowest core index. A border point joins the
    cluster of its lowest-indexed core neighbour. Noise is ``-1``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be at least 1")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels

    tree = cKDTree(points)
    counts = np.asarray(tree.query_ball_point(points, eps, return_length=True))
    core = counts >= min_pts
    if not core.any():
        return labels
    core_idx = np.flatnonzero(core)
    comp = _core_components(points[core_idx], eps)
    # number components by their lowest core index
    first: dict[int, int] = {}
    for c in comp.tolist():
        if c not in first:
            first[c] = len(first)
    labels[core_idx] = [first[c] for c in comp.tolist()]

    # a border point joins the cluster of its lowest-index core neighbour
    border = np.flatnonzero(~core)
    if len(border):
        core_tree = cKDTree(points[core_idx])
        for b, hits in zip(border.tolist(), core_tree.query_ball_point(points[border], eps)):
            if hits:
                labels[b] = labels[core_idx[min(hits)]]
    return labels


def _core_components(pts: np.ndarray, eps: float) -> np.ndarray:
    """Connected components of the eps-graph on core points.

    Points sharing a grid cell of side eps/sqrt(2) are always within eps, so
    cells are merged wholesale and only nearby cell pairs need a distance
    query.
    """
    side = eps / math.sqrt(2.0)
    cells = np.floor(pts / side).astype(np.int64)
    keys, cell_of = np.unique(cells, axis=0, return_inverse=True)
    cell_of = cell_of.reshape(-1)
    members = [np.flatnonzero(cell_of == i) for i in range(len(keys))]
    lookup = {tuple(k): i for i, k in enumerate(keys.tolist())}
    parent = list(range(len(keys)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    trees: dict[int, cKDTree] = {}
    for i, (cx, cy) in enumerate(keys.tolist()):
        for dx in range(-2, 3):
            for dy in range(-2, 3):
                j = lookup.get((cx + dx, cy + dy))
                if j is None or j <= i or find(i) == find(j):
                    continue
                if i not in trees:
                    trees[i] = cKDTree(pts[members[i]])
                # the bound is strict and the eps-ball is closed, so widen it by one ulp
                d, _ = trees[i].query(pts[members[j]], k=1, distance_upper_bound=np.nextafter(eps, np.inf))
                if (d <= eps).any():
                    parent[find(j)] = find(i)
    roots = np.array([find(i) for i in range(len(keys))])
    return roots[cell_of]


def find_stay_regions(
    points: Sequence[GpsPoint],
    eps: float = 5.0,
    min_pts: int = 10,
    origin: tuple[float, float] | None = None,
) -> tuple[list[StayRegion], np.ndarray]:
    """Cluster a participant's raw samples into stay regions.

    Altitude is ignored. Returns the regions and the per-point cluster label.
    """
    if not points:
        return [], np.empty(0, dtype=np.int64)
    lat = np.array([p.lat for p in points])
    lon = np.array([p.lon for p in points])
    if origin is None:
        origin = (float(lat.mean()), float(lon.mean()))
    labels = dbscan(project(lat, lon, origin), eps, min_pts)
    regions = []
    for rid in range(int(labels.max()) + 1):
        members = np.flatnonzero(labels == rid)
        regions.append(
            StayRegion(rid, (float(lat[members].mean()), float(lon[members].mean())), members.tolist())
        )
    return regions, labels


# ---------------------------------------------------------------------------
# labeling


@dataclass
class GazetteerEntry:
    label: str
    zone: int
    location: int
    participant_id: str | None = None
    point: tuple[float, float] | None = None  # lat, lon
    radius_m: float = 0.0
    polygon: list[tuple[float, float]] | None = None  # [(lat, lon), ...]

    @property
    def code(self) -> int:
        return encode(self.zone, self.location).value

    def applies_to(self, participant_id: str) -> bool:
        return self.participant_id is None or self.participant_id == participant_id

    def geometry(self, origin):
        if self.polygon is not None:
            lat, lon = zip(*self.polygon)
            return Polygon(project(lat, lon, origin))
        xy = project([self.point[0]], [self.point[1]], origin)[0]
        return Point(xy).buffer(self.radius_m) if self.radius_m > 0 else Point(xy)


@dataclass
class Gazetteer:
    entries: list[GazetteerEntry]

    def labels(self) -> dict[int, str]:
        return {e.code: e.label for e in self.entries}

    def resolve(
        self, participant_id: str, centroid: tuple[float, float], cutoff_m: float
    ) -> GazetteerEntry | None:
        """Entry containing the centroid (participant-specific and smallest
        first), else the nearest within ``cutoff_m``, else None."""
        origin = centroid
        here = Point(0.0, 0.0)
        containing, near = [], []
        for order, e in enumerate(self.entries):
            if not e.applies_to(participant_id):
                continue
            geom = e.geometry(origin)
            dist = geom.distance(here)
            if dist == 0.0:
                containing.append((e.participant_id is None, geom.area, order, e))
            elif dist <= cutoff_m:
                near.append((dist, order, e))
        if containing:
            return min(containing, key=lambda t: t[:3])[-1]
        if near:
            return min(near, key=lambda t: t[:2])[-1]
        return None


def load_gazetteer(path: str | Path) -> Gazetteer:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    entries = []
    for raw in doc.get("entries", doc if isinstance(doc, list) else []):
        entries.append(
            GazetteerEntry(
                label=raw["label"],
                zone=int(raw["zone"]),
                location=int(raw["location"]),
                participant_id=None if raw.get("participant") is None else str(raw["participant"]),
                point=tuple(raw["point"]) if "point" in raw else None,
                radius_m=float(raw.get("radius_m", 0.0)),
                polygon=[tuple(p) for p in raw["polygon"]] if "polygon" in raw else None,
            )
        )
    return Gazetteer(entries)


def dump_gazetteer(gaz: Gazetteer, path: str | Path) -> None:
    rows = []
    for e in gaz.entries:
        row = {"label": e.label, "zone": e.zone, "location": e.location}
        if e.participant_id is not None:
            row["participant"] = e.participant_id
        if e.polygon is not None:
            row["polygon"] = [list(p) for p in e.polygon]
        else:
            row["point"] = list(e.point)
            row["radius_m"] = e.radius_m
        rows.append(row)
    with open(path, "w") as fh:
        yaml.safe_dump({"entries": rows}, fh, sort_keys=False)


def label_regions(
    regions: Sequence[StayRegion],
    gazetteer: Gazetteer,
    participant_id: str,
    cutoff_m: float = 50.0,
) -> list[StayRegion]:
    """Attach a gazetteer label to each region; unresolved regions get UNKNOWN."""
    for r in regions:
        hit = gazetteer.resolve(participant_id, r.centroid, cutoff_m)
        if hit is None:
            r.label, r.code = UNKNOWN_LABEL, UNKNOWN
            logger.warning(
                "participant %s: region %d at %s has no gazetteer label within %.0f m",
                participant_id, r.region_id, r.centroid, cutoff_m,
            )
        else:
            r.label, r.code = hit.label, hit.code
    return [r for r in regions if r.code == UNKNOWN]


def label_stay_regions(
    points: Sequence[GpsPoint],
    regions: Sequence[StayRegion],
    point_labels: np.ndarray,
    gazetteer: Gazetteer,
    cutoff_m: float = 50.0,
) -> tuple[list[LocationDay], list[StayRegion]]:
    """Turn one participant's clustered trace into complete labeled days.

    Every minute inherits the code of the held sample's region, or
    ``IN_TRANSIT`` for unclustered samples. A first day without a sample at
    00:00 and a last day whose final sample is more than one sampling interval
    before midnight are dropped as partial. Returns the days and the regions
    that could not be labeled.
    """
    if not points:
        return [], []
    pid = points[0].participant_id
    unresolved = label_regions(regions, gazetteer, pid, cutoff_m)
    region_code = {r.region_id: r.code for r in regions}
    sample_code = np.array(
        [region_code[int(c)] if c != NOISE else IN_TRANSIT for c in point_labels],
        dtype=np.int16,
    )
    minutes = _check_order(points)
    grid, source = zoh_indices(minutes, through_day_end=True)
    codes = sample_code[source]

    first_day = int(grid[0]) // MINUTES_PER_DAY
    last_day = int(grid[-1]) // MINUTES_PER_DAY
    start = first_day if int(grid[0]) % MINUTES_PER_DAY == 0 else first_day + 1
    cadence = int(np.median(np.diff(minutes))) if len(minutes) > 1 else 1
    tail = MINUTES_PER_DAY - 1 - int(minutes[-1]) % MINUTES_PER_DAY
    stop = last_day if tail < cadence else last_day - 1
    labels = gazetteer.labels()
    days = []
    for k, ordinal in enumerate(range(start, stop + 1)):
        lo = ordinal * MINUTES_PER_DAY - int(grid[0])
        day_codes = codes[lo: lo + MINUTES_PER_DAY]
        d = date.fromordinal(ordinal)
        days.append(LocationDay(pid, k, day_type_of(d), day_codes.copy(), labels, d))
    return days, unresolved


def process_participant(
    points: Sequence[GpsPoint],
    gazetteer: Gazetteer,
    eps: float = 5.0,
    min_pts: int = 10,
    cutoff_m: float = 50.0,
) -> tuple[list[LocationDay], list[StayRegion]]:
    _check_order(points)
    regions, point_labels = find_stay_regions(points, eps, min_pts)
    return label_stay_regions(points, regions, point_labels, gazetteer, cutoff_m)


def process_traces(
    traces: Mapping[str, Sequence[GpsPoint]],
    gazetteer: Gazetteer,
    eps: float = 5.0,
    min_pts: int = 10,
    cutoff_m: float = 50.0,
) -> tuple[list[LocationDay], dict[str, list[StayRegion]]]:
    """Process every participant; results merged in participant-id order."""
    days, unresolved = [], {}
    for pid in sorted(traces):
        d, u = process_participant(traces[pid], gazetteer, eps, min_pts, cutoff_m)
        days.extend(d)
        if u:
            unresolved[pid] = u
    return days, unresolved


# ---------------------------------------------------------------------------
# file formats

TRACE_COLUMNS = ("participant_id", "timestamp_iso8601", "lat", "lon", "alt")
RECORD_COLUMNS = ("participant_id", "day", "minute", "location_code", "label", "day_type")


def read_traces_csv(
    path: str | Path, columns: Mapping[str, str] | None = None
) -> dict[str, list[GpsPoint]]:
    """Read a trace CSV into per-participant sample lists.

    ``columns`` maps the canonical names in :data:`TRACE_COLUMNS` to the
    headers actually present, which is how third-party exports (for example
    a dataset with ``user``/``time``/``latitude`` headers) are adapted. A
    missing ``alt`` column reads as 0.
    """
    colmap = {c: c for c in TRACE_COLUMNS}
    if columns:
        colmap.update(columns)
    traces: dict[str, list[GpsPoint]] = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            alt = row.get(colmap["alt"])
            traces[str(row[colmap["participant_id"]])].append(
                GpsPoint(
                    str(row[colmap["participant_id"]]),
                    datetime.fromisoformat(row[colmap["timestamp_iso8601"]]),
                    float(row[colmap["lat"]]),
                    float(row[colmap["lon"]]),
                    float(alt) if alt not in (None, "") else 0.0,
                )
            )
    for pts in traces.values():
        pts.sort(key=lambda p: p.timestamp)
    return dict(traces)


def write_traces_csv(points: Iterable[GpsPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for p in points:
            w.writerow([p.participant_id, p.timestamp.isoformat(), f"{p.lat:.7f}",
                        f"{p.lon:.7f}", f"{p.alt:.1f}"])


def write_records_csv(days: Iterable[LocationDay], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for d in days:
            cache: dict[int, tuple[str, str]] = {}
            for minute, c in enumerate(d.codes.tolist()):
                if c not in cache:
                    cache[c] = (code_to_str(c), d.label_of(c))
                code_s, label = cache[c]
                w.writerow([d.participant_id, d.day_index, minute, code_s, label, d.day_type])


def read_records_csv(path: str | Path) -> list[LocationDay]:
    """Inverse of :func:`write_records_csv`.

    The ``day_type`` column is optional; without it day indices are read as
    a Monday-first calendar (indices 5 and 6 of each week are weekend days).
    """
    buckets: dict[tuple[str, int], np.ndarray] = {}
    labels: dict[int, str] = {}
    kinds: dict[tuple[str, int], str] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["participant_id"], int(row["day"]))
            arr = buckets.get(key)
            if arr is None:
                arr = buckets[key] = np.full(MINUTES_PER_DAY, -1, dtype=np.int16)
            code = str_to_code(row["location_code"])
            arr[int(row["minute"])] = code
            if code < 64:
                labels[code] = row["label"]
            if row.get("day_type"):
                kinds[key] = row["day_type"]
    days = []
    for (pid, di), arr in sorted(buckets.items()):
        if (arr < 0).any():
            raise ValueError(f"participant {pid} day {di}: missing minutes")
        kind = kinds.get((pid, di)) or ("weekend" if di % 7 >= 5 else "weekday")
        days.append(LocationDay(pid, di, kind, arr, dict(labels)))
    return days
