"""Synthetic occupation profiles, GPS traces, and time-location days.

Profiles are schedule templates (where to be and roughly when). They drive
both the GPS generator, which mimics a 5-minute, 21-day collection campaign
with a couple of meters of jitter, and a faster path that emits labeled
minute-level days directly for building the simulator's default matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from .mobility import (
    IN_TRANSIT,
    Gazetteer,
    GazetteerEntry,
    GpsPoint,
    LocationDay,
    MINUTES_PER_DAY,
    encode,
    unproject,
)
from .rng import stream
from .trajectory import ProbabilityMatrices, estimate_matrices

ORIGIN = (7.2906, 80.6337)  # Kandy
START = datetime(2024, 1, 1)  # a Monday

# (zone index, location index) per semantic label
LABEL_CODES = {
    "home": (0, 0),
    "residential": (0, 1),
    "school": (1, 0),
    "hospital": (2, 0),
    "bank": (3, 0),
    "office": (3, 1),
    "farm": (4, 0),
    "factory": (5, 0),
    "market": (6, 0),
    "supermarket": (6, 1),
}
PERSONAL = ("home", "residential")


@dataclass
class Activity:
    label: str
    start: float  # mean start minute
    jitter: float = 15.0
    prob: float = 1.0


@dataclass
class Profile:
    occupation: str
    subclass: str
    weekday: list[Activity]
    weekend: list[Activity] | None = None
    travel: tuple[float, float] = (20.0, 5.0)

    def schedule(self, day_type: str) -> list[Activity]:
        if day_type == "weekend" and self.weekend is not None:
            return self.weekend
        return self.weekday

    @property
    def labels(self) -> set[str]:
        acts = self.weekday + (self.weekend or [])
        return {a.label for a in acts}


def A(label, start, jitter=15.0, prob=1.0) -> Activity:
    return Activity(label, float(start), float(jitter), float(prob))


def h(hours: float) -> float:
    return hours * 60.0


def _rest_day(extra_prob=0.4):
    return [A("home", 0, 0), A("market", h(10), 40, extra_prob), A("home", h(12), 30),
            A("residential", h(16), 30, 0.4), A("home", h(18), 30)]


# Illustrative schedules; not fitted to any real cohort.
DEFAULT_PROFILES: list[Profile] = [
    Profile("student", "regular",
            [A("home", 0, 0), A("school", h(7.25), 10), A("home", h(14), 15),
             A("residential", h(16), 30, 0.3), A("home", h(18), 20)],
            [A("home", 0, 0), A("residential", h(10), 40, 0.5), A("home", h(12.5), 30),
             A("market", h(16), 40, 0.3), A("home", h(17.5), 30)]),
    Profile("student", "irregular",
            [A("home", 0, 0), A("school", h(7.25), 10, 0.6), A("home", h(13), 40),
             A("residential", h(15), 40, 0.6), A("home", h(18.5), 30)],
            [A("home", 0, 0), A("residential", h(9), 40, 0.7), A("home", h(13), 30),
             A("residential", h(16), 40, 0.5), A("home", h(19), 30)]),
    Profile("teacher", "regular",
            [A("home", 0, 0), A("school", h(7), 10), A("home", h(14.5), 20),
             A("market", h(16.5), 30, 0.3), A("home", h(17.5), 20)],
            _rest_day(0.5)),
    Profile("doctor", "day_shift",
            [A("home", 0, 0), A("hospital", h(8), 15), A("market", h(17.5), 20, 0.3),
             A("home", h(18.5), 20)],
            [A("home", 0, 0), A("hospital", h(9), 20, 0.3), A("home", h(13), 30)]),
    Profile("doctor", "night_shift",
            [A("hospital", 0, 0), A("home", h(8.5), 15), A("market", h(16), 30, 0.3),
             A("home", h(17), 20), A("hospital", h(20), 15)]),
    Profile("nurse", "day_shift",
            [A("home", 0, 0), A("hospital", h(7), 10), A("home", h(15.5), 20),
             A("residential", h(17), 30, 0.3), A("home", h(18.5), 20)],
            _rest_day(0.4)),
    Profile("nurse", "night_shift",
            [A("hospital", 0, 0), A("home", h(7.5), 15), A("residential", h(16), 30, 0.3),
             A("home", h(17.5), 20), A("hospital", h(19), 10)]),
    Profile("bank_worker", "regular",
            [A("home", 0, 0), A("bank", h(8.25), 10), A("home", h(16.75), 20),
             A("market", h(17.75), 20, 0.3), A("home", h(18.75), 20)],
            _rest_day(0.5)),
    Profile("farmer", "field",
            [A("home", 0, 0), A("farm", h(6), 20), A("home", h(12), 20), A("farm", h(14), 20),
             A("home", h(17.5), 20)],
            [A("home", 0, 0), A("farm", h(6.5), 30, 0.6), A("home", h(11), 30),
             A("market", h(16), 40, 0.4), A("home", h(17.5), 30)]),
    Profile("garment_worker", "regular",
            [A("home", 0, 0), A("factory", h(7.25), 10), A("home", h(17.5), 15)],
            _rest_day(0.3)),
    Profile("supermarket_worker", "morning",
            [A("home", 0, 0), A("supermarket", h(7.5), 10), A("home", h(15.5), 15)]),
    Profile("supermarket_worker", "evening",
            [A("home", 0, 0), A("market", h(10), 30, 0.3), A("home", h(11.5), 20),
             A("supermarket", h(14), 10), A("home", h(22.25), 15)]),
    Profile("office_worker", "regular",
            [A("home", 0, 0), A("office", h(8.5), 15), A("market", h(17), 20, 0.4),
             A("home", h(18), 20)],
            _rest_day(0.5)),
    Profile("homemaker", "regular",
            [A("home", 0, 0), A("residential", h(9), 30, 0.6), A("home", h(10.5), 20),
             A("market", h(16), 30, 0.5), A("home", h(17), 20)]),
]


def two_group_profiles() -> list[Profile]:
    """A single occupation with a day-shift and a night-shift sub-class."""
    return [
        Profile("guard", "day",
                [A("home", 0, 0), A("bank", h(7), 10), A("home", h(19), 10)]),
        Profile("guard", "night",
                [A("bank", 0, 0), A("home", h(7.5), 10), A("bank", h(19), 10)]),
    ]


def day_labels(profile: Profile, day_type: str, rng: np.random.Generator) -> list[tuple[str, int]]:
    """Sample one day's ordered (label, start minute) stays, before travel."""
    acts = [a for a in profile.schedule(day_type) if a.prob >= 1.0 or rng.random() < a.prob]
    stays: list[tuple[str, int]] = []
    last = -1
    for a in acts:
        t = 0 if a.start == 0 and a.jitter == 0 else int(round(rng.normal(a.start, a.jitter)))
        if stays:
            t = max(t, last + 30)
        if t >= MINUTES_PER_DAY - 10:
            break
        if stays and stays[-1][0] == a.label:
            continue
        stays.append((a.label, t))
        last = t
    if not stays or stays[0][1] != 0:
        stays.insert(0, ("home", 0))
        stays = [stays[0]] + [s for s in stays[1:] if s[1] > 0]
    return stays


def render_day(stays: list[tuple[str, int]], profile: Profile, rng: np.random.Generator):
    """Minute labels for a day; travel minutes precede each change of place."""
    labels = np.empty(MINUTES_PER_DAY, dtype=object)
    bounds = [s[1] for s in stays] + [MINUTES_PER_DAY]
    for i, (label, start) in enumerate(stays):
        labels[start:bounds[i + 1]] = label
    for i in range(1, len(stays)):
        start = stays[i][1]
        room = start - stays[i - 1][1] - 10
        mean, sd = profile.travel
        travel = int(np.clip(round(rng.normal(mean, sd)), 5, max(5, room)))
        labels[max(stays[i - 1][1] + 1, start - travel):start] = None
    return labels


def synth_days(
    profile: Profile,
    participant_id: str,
    n_days: int,
    seed: int,
    start: datetime = START,
) -> list[LocationDay]:
    """Labeled minute-level days straight from a profile (no GPS stage)."""
    from .mobility import day_type_of

    labels_of = {encode(*LABEL_CODES[l]).value: l for l in LABEL_CODES}
    code_of = {l: encode(*c).value for l, c in LABEL_CODES.items()}
    rng = stream(seed, "synth-days", participant_id)
    out = []
    for d in range(n_days):
        date = (start + timedelta(days=d)).date()
        kind = day_type_of(date)
        minute_labels = render_day(day_labels(profile, kind, rng), profile, rng)
        codes = np.array([IN_TRANSIT if x is None else code_of[x] for x in minute_labels],
                         dtype=np.int16)
        out.append(LocationDay(participant_id, d, kind, codes, labels_of, date))
    return out


def build_matrices(
    profiles: Sequence[Profile] = DEFAULT_PROFILES,
    participants: int = 20,
    n_days: int = 21,
    seed: int = 0,
    alpha: float = 0.0,
    time_conditioned: bool = True,
) -> dict[tuple[str, str, str], ProbabilityMatrices]:
    """Fit visit/occupancy matrices for every (occupation, subclass, day type)."""
    out = {}
    for prof in profiles:
        days = []
        for p in range(participants):
            days += synth_days(prof, f"{prof.occupation}-{prof.subclass}-{p}", n_days, seed)
        for kind in ("weekday", "weekend"):
            sel = [d for d in days if d.day_type == kind]
            if not sel:
                continue
            out[(prof.occupation, prof.subclass, kind)] = estimate_matrices(
                [d.codes for d in sel], sel[0].labels, alpha=alpha, time_conditioned=time_conditioned,
                meta={"occupation": prof.occupation, "subclass": prof.subclass, "day_type": kind},
            )
    return out


# ---------------------------------------------------------------------------
# GPS traces


@dataclass
class Participant:
    participant_id: str
    profile: Profile
    anchors: dict[str, tuple[float, float]] = field(default_factory=dict)  # label -> (x, y) m


def _place(rng, radius):
    r = radius * math.sqrt(rng.random())
    th = 2 * math.pi * rng.random()
    return (r * math.cos(th), r * math.sin(th))


def make_participants(
    profiles: Sequence[Profile],
    per_profile: int,
    seed: int,
    sites_per_label: int = 2,
    area_m: float = 3000.0,
) -> tuple[list[Participant], dict[str, list[tuple[float, float]]]]:
    """Participants with personal home/neighbourhood anchors and shared work sites."""
    rng = stream(seed, "synth-sites")
    shared = sorted({l for p in profiles for l in p.labels} - set(PERSONAL))
    sites = {l: [_place(rng, area_m) for _ in range(sites_per_label)] for l in shared}
    people = []
    for prof in profiles:
        for i in range(per_profile):
            pid = f"{prof.occupation}-{prof.subclass}-{i:02d}"
            prng = stream(seed, "synth-anchor", pid)
            home = _place(prng, area_m)
            ang = 2 * math.pi * prng.random()
            anchors = {
                "home": home,
                "residential": (home[0] + 200 * math.cos(ang), home[1] + 200 * math.sin(ang)),
            }
            for l in shared:
                anchors[l] = sites[l][int(prng.integers(len(sites[l])))]
            people.append(Participant(pid, prof, anchors))
    return people, sites


def gazetteer_for(participants: Sequence[Participant], sites, origin=ORIGIN) -> Gazetteer:
    entries = []
    for label, locs in sorted(sites.items()):
        z, _ = LABEL_CODES[label]
        base = LABEL_CODES[label][1]
        for i, (x, y) in enumerate(locs):
            lat, lon = unproject(np.array([[x, y]]), origin)
            entries.append(GazetteerEntry(label, z, min(7, base + 2 * i), None,
                                          (float(lat[0]), float(lon[0])), 40.0))
    for p in participants:
        for label in PERSONAL:
            x, y = p.anchors[label]
            lat, lon = unproject(np.array([[x, y]]), origin)
            z, loc = LABEL_CODES[label]
            entries.append(GazetteerEntry(label, z, loc, p.participant_id,
                                          (float(lat[0]), float(lon[0])), 30.0))
    return Gazetteer(entries)


def synth_gps(
    profiles: Sequence[Profile],
    per_profile: int = 5,
    n_days: int = 21,
    cadence_min: int = 5,
    jitter_m: float = 2.0,
    seed: int = 0,
    origin: tuple[float, float] = ORIGIN,
    start: datetime = START,
) -> tuple[list[GpsPoint], list[Participant], Gazetteer]:
    """Synthetic GPS campaign: ``n_days`` of ``cadence_min`` samples per participant.

    Stays jitter around their anchor with ``jitter_m`` standard deviation;
    travel samples are interpolated between the two anchors with wider
    scatter.
    """
    people, sites = make_participants(profiles, per_profile, seed)
    points: list[GpsPoint] = []
    for p in people:
        rng = stream(seed, "synth-gps", p.participant_id)
        xs, ys = [], []
        for d in range(n_days):
            kind = "weekend" if (start + timedelta(days=d)).weekday() >= 5 else "weekday"
            stays = day_labels(p.profile, kind, rng)
            labels = render_day(stays, p.profile, rng)
            for minute in range(0, MINUTES_PER_DAY, cadence_min):
                lab = labels[minute]
                if lab is not None:
                    ax, ay = p.anchors[lab]
                    xs.append(ax + rng.normal(0, jitter_m))
                    ys.append(ay + rng.normal(0, jitter_m))
                    continue
                # travel: find surrounding stays
                before = minute
                while before > 0 and labels[before] is None:
                    before -= 1
                after = minute
                while after < MINUTES_PER_DAY - 1 and labels[after] is None:
                    after += 1
                a = p.anchors[labels[before] or "home"]
                b = p.anchors[labels[after] or "home"]
                f = (minute - before) / max(1, after - before)
                xs.append(a[0] + f * (b[0] - a[0]) + rng.normal(0, 25.0))
                ys.append(a[1] + f * (b[1] - a[1]) + rng.normal(0, 25.0))
        lat, lon = unproject(np.column_stack([xs, ys]), origin)
        for k in range(len(xs)):
            ts = start + timedelta(minutes=cadence_min * k)
            points.append(GpsPoint(p.participant_id, ts, float(lat[k]), float(lon[k]),
                                   float(500 + rng.normal(0, 3))))
    return points, people, gazetteer_for(people, sites, origin)
