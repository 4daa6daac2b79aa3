"""Visit/occupancy probability matrices and roulette-wheel day synthesis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MINUTES = 1440
FORMAT_TAG = "# episim-matrices v1"

logger = logging.getLogger(__name__)


@dataclass
class StayTable:
    """Observed stays keyed by start minute, for start-conditioned sampling.

    Rows are sorted by start; ``offsets[t]:offsets[t + 1]`` selects the stays
    that began at minute ``t``. ``weight`` counts how often each
    (start, location, duration) triple was seen.
    """

    start: np.ndarray
    loc: np.ndarray
    dur: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.int64)
        self.loc = np.asarray(self.loc, dtype=np.int64)
        self.dur = np.asarray(self.dur, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=float)
        n = len(self.start)
        if not (len(self.loc) == len(self.dur) == len(self.weight) == n):
            raise ValueError("stay table columns differ in length")
        if n and (np.any(np.diff(self.start) < 0)):
            order = np.lexsort((self.dur, self.loc, self.start))
            self.start, self.loc = self.start[order], self.loc[order]
            self.dur, self.weight = self.dur[order], self.weight[order]
        if n and (self.start.min() < 0 or np.any(self.dur <= 0)
                  or np.any(self.start + self.dur > MINUTES) or np.any(self.weight <= 0)):
            raise ValueError("stay table holds an impossible stay")
        self.offsets = np.searchsorted(self.start, np.arange(MINUTES + 1), side="left")
        self.cum = np.cumsum(self.weight)

    def draw(self, t: int, u: float) -> tuple[int, int] | None:
        """(location, duration) of a stay starting at ``t``; ``u`` is uniform."""
        a, b = self.offsets[t], self.offsets[t + 1]
        if a == b:
            return None
        base = self.cum[a - 1] if a else 0.0
        target = base + u * (self.cum[b - 1] - base)
        i = min(int(np.searchsorted(self.cum[a:b], target, side="right")) + a, b - 1)
        return int(self.loc[i]), int(self.dur[i])


@dataclass
class ProbabilityMatrices:
    """Visit matrix (locations x minute) and stay-duration matrix.

    ``occupancy[l, d]`` is the probability that a stay at ``l`` lasts
    ``d + 1`` minutes. ``stays``, when present, holds the time-conditioned
    variant: the joint law of (location, duration) given the start minute.
    """

    labels: list[str]
    visit: np.ndarray
    occupancy: np.ndarray
    stays: StayTable | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.visit = np.asarray(self.visit, dtype=float)
        self.occupancy = np.asarray(self.occupancy, dtype=float)
        n = len(self.labels)
        if self.visit.shape != (n, MINUTES) or self.occupancy.shape != (n, MINUTES):
            raise ValueError("matrix shapes must be (n_locations, 1440)")
        if self.stays is not None and len(self.stays.loc) and self.stays.loc.max() >= n:
            raise ValueError("stay table refers to an unknown location")
        self._visit_cdf = None
        self._occ_cdf = None

    def validate(self, tol: float = 1e-9) -> None:
        if (self.visit < 0).any() or (self.occupancy < 0).any():
            raise ValueError("negative probability")
        cols = self.visit.sum(axis=0)
        if np.abs(cols - 1.0).max() > tol:
            raise ValueError("visit matrix columns must sum to 1")
        rows = self.occupancy.sum(axis=1)
        bad = (rows > 0) & (np.abs(rows - 1.0) > tol)
        if bad.any():
            raise ValueError(f"occupancy rows not normalized: {np.flatnonzero(bad).tolist()}")

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def visit_cdf(self) -> np.ndarray:
        if self._visit_cdf is None:
            self._visit_cdf = np.cumsum(self.visit, axis=0)
        return self._visit_cdf

    @property
    def occupancy_cdf(self) -> np.ndarray:
        if self._occ_cdf is None:
            self._occ_cdf = np.cumsum(self.occupancy, axis=1)
        return self._occ_cdf


@dataclass
class DailyTrajectory:
    minutes: np.ndarray  # location index per minute
    stays: list[tuple[int, int, int]]  # (location, start, duration)
    labels: list[str] | None = None
    fallbacks: int = 0

    def check(self) -> None:
        t = 0
        for loc, start, dur in self.stays:
            if start != t or dur <= 0:
                raise ValueError("stays do not partition the day")
            if (self.minutes[start:start + dur] != loc).any():
                raise ValueError("minutes disagree with stays")
            t += dur
        if t != MINUTES:
            raise ValueError("stays do not cover the day")


def _runs(row: np.ndarray):
    change = np.flatnonzero(np.diff(row)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(row)]])
    return starts, ends - starts, row[starts]


def estimate_matrices(
    days: Sequence[np.ndarray],
    labels_of: dict[int, str] | None = None,
    labels: Sequence[str] | None = None,
    alpha: float = 0.0,
    time_conditioned: bool = True,
    meta: dict[str, str] | None = None,
) -> ProbabilityMatrices:
    """Empirical visit and stay-duration matrices from complete days.

    ``days`` holds 1440-long arrays of location codes; ``labels_of`` names
    each code (codes sharing a name share a row). ``labels`` fixes the row
    order and may include never-visited locations. ``alpha`` is an additive
    (Laplace) smoothing count applied to the matrices. With
    ``time_conditioned`` the observed stays are also kept as a
    :class:`StayTable` so generation can condition on the start minute.
    """
    if len(days) == 0:
        raise ValueError("need at least one day")
    codes = np.vstack([np.asarray(d) for d in days])
    if codes.shape[1] != MINUTES:
        raise ValueError("each day must hold 1440 minutes")
    uniq, inverse = np.unique(codes, return_inverse=True)
    names = [labels_of.get(int(c), str(c)) if labels_of else str(c) for c in uniq.tolist()]
    if labels is None:
        labels = sorted(set(names))
    labels = list(labels)
    pos = {name: i for i, name in enumerate(labels)}
    missing = set(names) - set(pos)
    if missing:
        raise ValueError(f"locations not in label list: {sorted(missing)}")
    idx = np.array([pos[x] for x in names], dtype=np.int64)[inverse.reshape(codes.shape)]
    n = len(labels)

    visit = np.zeros((n, MINUTES))
    for t in range(MINUTES):
        visit[:, t] = np.bincount(idx[:, t], minlength=n)
    occ = np.zeros((n, MINUTES))
    runs = []
    for row in idx:
        starts, lens, locs = _runs(row)
        np.add.at(occ, (locs, lens - 1), 1.0)
        runs.append(np.column_stack([starts, locs, lens]))

    visit = (visit + alpha) / (len(idx) + alpha * n)
    occ = _normalize_rows(occ, alpha)
    table = None
    if time_conditioned:
        triples, counts = np.unique(np.vstack(runs), axis=0, return_counts=True)
        table = StayTable(triples[:, 0], triples[:, 1], triples[:, 2], counts)
    m = ProbabilityMatrices(labels, visit, occ, table, dict(meta or {}))
    m.validate()
    return m


def _normalize_rows(counts: np.ndarray, alpha: float) -> np.ndarray:
    counts = counts + alpha
    tot = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, tot, out=np.zeros_like(counts), where=tot > 0)


def generate_trajectory(
    m: ProbabilityMatrices, rng: np.random.Generator, use_stays: bool = True
) -> DailyTrajectory:
    """Roulette-wheel synthesis of one day.

    At minute t draw a location from visit column t, then a stay length from
    that location's duration distribution restricted to what fits before
    midnight; occupy and advance. A location with no feasible duration mass
    gets a 1-minute stay, counted in ``fallbacks``.

    When ``m`` carries a stay table (and ``use_stays``), the wheel at minute
    t spins over the stays observed to start at t instead, drawing location
    and duration jointly. Start minutes absent from the table use the column
    draw above.
    """
    table = m.stays if use_stays else None
    vcdf = m.visit_cdf
    ocdf = m.occupancy_cdf
    minutes = np.empty(MINUTES, dtype=np.int64)
    stays = []
    fallbacks = 0
    t = 0
    while t < MINUTES:
        hit = table.draw(t, rng.random()) if table is not None else None
        if hit is not None:
            loc, dur = hit
        else:
            col = vcdf[:, t]
            loc = min(int(np.searchsorted(col, rng.random() * col[-1], side="right")), len(col) - 1)
            row = ocdf[loc]
            room = MINUTES - t
            mass = row[room - 1]
            if mass <= 0:
                dur = 1
                fallbacks += 1
            else:
                dur = min(int(np.searchsorted(row[:room], rng.random() * mass, side="right")), room - 1) + 1
        if stays and stays[-1][0] == loc:
            prev = stays[-1]
            stays[-1] = (loc, prev[1], prev[2] + dur)
        else:
            stays.append((loc, t, dur))
        minutes[t:t + dur] = loc
        t += dur
    if fallbacks:
        logger.debug("%d stays fell back to 1 minute", fallbacks)
    return DailyTrajectory(minutes, stays, m.labels, fallbacks)


def generate_many(
    m: ProbabilityMatrices, count: int, rng: np.random.Generator, use_stays: bool = True
) -> np.ndarray:
    """``count`` synthetic days stacked as a (count, 1440) index array."""
    return np.vstack([generate_trajectory(m, rng, use_stays).minutes for _ in range(count)])


def empirical_visit(minutes: np.ndarray, n_locations: int) -> np.ndarray:
    minutes = np.atleast_2d(minutes)
    out = np.zeros((n_locations, MINUTES))
    for t in range(MINUTES):
        out[:, t] = np.bincount(minutes[:, t], minlength=n_locations)
    return out / len(minutes)


def validate_distribution(trajectories, m: ProbabilityMatrices) -> tuple[np.ndarray, float]:
    """Per-minute total-variation distance between generated days and ``m``.

    Returns the 1440-long profile and its mean.
    """
    if isinstance(trajectories, np.ndarray):
        mins = np.atleast_2d(trajectories)
    else:
        trajectories = list(trajectories)
        if not trajectories:
            raise ValueError("need at least one trajectory")
        mins = np.vstack([t.minutes for t in trajectories])
    emp = empirical_visit(mins, len(m.labels))
    tv = 0.5 * np.abs(emp - m.visit).sum(axis=0)
    return tv, float(tv.mean())


# ---------------------------------------------------------------------------
# text format
#
#   # episim-matrices v1
#   meta <key> <value>           (zero or more)
#   labels <l1> <l2> ...
#   visit                        then one line of 1440 numbers per label
#   occupancy                    same
#   stays <count>                optional, then one "start loc dur weight" line each


def _rows(fh, block: np.ndarray):
    for row in block:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def save_matrices(m: ProbabilityMatrices, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(FORMAT_TAG + "\n")
        for k in sorted(m.meta):
            fh.write(f"meta {k} {m.meta[k]}\n")
        fh.write("labels " + " ".join(m.labels) + "\n")
        fh.write("visit\n")
        _rows(fh, m.visit)
        fh.write("occupancy\n")
        _rows(fh, m.occupancy)
        if m.stays is not None:
            st = m.stays
            fh.write(f"stays {len(st.start)}\n")
            for row in zip(st.start.tolist(), st.loc.tolist(), st.dur.tolist(), st.weight.tolist()):
                fh.write(f"{row[0]} {row[1]} {row[2]} {row[3]!r}\n")


def load_matrices(path: str | Path) -> ProbabilityMatrices:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != FORMAT_TAG:
        raise ValueError(f"{path}: not an episim matrices file")
    meta, labels, table = {}, None, None
    blocks: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        head = lines[i].split()
        i += 1
        if not head:
            continue
        if head[0] == "meta":
            meta[head[1]] = " ".join(head[2:])
        elif head[0] == "labels":
            labels = head[1:]
        elif head[0] == "stays":
            count = int(head[1])
            rows = np.array([lines[i + r].split() for r in range(count)], dtype=float).reshape(count, 4)
            table = StayTable(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3])
            i += count
        elif head[0] in ("visit", "occupancy"):
            if labels is None:
                raise ValueError(f"{path}: matrix block before labels")
            n = len(labels)
            blocks[head[0]] = np.array([[float(x) for x in lines[i + r].split()] for r in range(n)])
            i += n
        else:
            raise ValueError(f"{path}: unknown block {head[0]!r}")
    m = ProbabilityMatrices(labels, blocks["visit"], blocks["occupancy"], table, meta)
    m.validate()
    return m


def matrices_filename(occupation: str, subclass: str, day_type: str) -> str:
    return f"{occupation}__{subclass}__{day_type}.txt"


def save_matrix_set(ms: dict[tuple[str, str, str], ProbabilityMatrices], directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for (occ, sub, dt), m in sorted(ms.items()):
        m.meta.update(occupation=occ, subclass=sub, day_type=dt)
        save_matrices(m, directory / matrices_filename(occ, sub, dt))


def load_matrix_set(directory: str | Path) -> dict[tuple[str, str, str], ProbabilityMatrices]:
    out = {}
    for f in sorted(Path(directory).glob("*__*__*.txt")):
        occ, sub, dt = f.stem.split("__")
        out[(occ, sub, dt)] = load_matrices(f)
    if not out:
        raise FileNotFoundError(f"no matrices in {directory}")
    return out
