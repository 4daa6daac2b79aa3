"""Airborne transmission: contacts within a radius, per-contact infection, testing, vaccination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .environment import ConfigError

DEFAULT_K = 0.3
CONTACT_RADIUS_M = 1.0


@dataclass
class AgentImmunity:
    S_age: float
    alpha_vacc: float = 0.0
    alpha_hyg: float = 0.0
    gamma_vacc: float = 0.0
    gamma_hyg: float = 0.0
    k: float = DEFAULT_K

    def __post_init__(self):
        for name in ("S_age", "alpha_vacc", "alpha_hyg", "gamma_vacc", "gamma_hyg"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.alpha_vacc * self.gamma_vacc + self.alpha_hyg * self.gamma_hyg > 1.0 + 1e-12:
            raise ValueError("alpha_vacc*gamma_vacc + alpha_hyg*gamma_hyg exceeds 1")


def infection_prob(imm: AgentImmunity) -> float:
    """Per-contact infection probability, clipped to [0, 1]."""
    rho = imm.S_age * imm.k * (1.0 - imm.alpha_vacc * imm.gamma_vacc - imm.alpha_hyg * imm.gamma_hyg)
    return min(1.0, max(0.0, rho))


def infection_probs(S_age, k, alpha_vacc, gamma_vacc, alpha_hyg, gamma_hyg) -> np.ndarray:
    rho = np.asarray(S_age) * k * (1.0 - np.asarray(alpha_vacc) * gamma_vacc
                                   - np.asarray(alpha_hyg) * gamma_hyg)
    return np.clip(rho, 0.0, 1.0)


@dataclass
class Contact:
    time: int
    place: int
    transmitter: int
    receiver: int
    distance_m: float


def contact_pairs(
    places: np.ndarray,
    xy: np.ndarray,
    transmitters: np.ndarray,
    receivers: np.ndarray,
    radius: float = CONTACT_RADIUS_M,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (transmitter, receiver) pairs sharing a place within ``radius``.

    ``places`` and ``xy`` are indexed by agent; ``transmitters`` and
    ``receivers`` are agent index arrays. Returns (t, r, distance) sorted by
    receiver then transmitter. Self-pairs are skipped.
    """
    transmitters = np.asarray(transmitters, dtype=np.int64)
    receivers = np.asarray(receivers, dtype=np.int64)
    empty = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    if not len(transmitters) or not len(receivers):
        return empty
    order = np.argsort(places[receivers], kind="stable")
    rec = receivers[order]
    rp = places[rec]
    tp = places[transmitters]
    lo = np.searchsorted(rp, tp, side="left")
    hi = np.searchsorted(rp, tp, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return empty
    ti = np.repeat(transmitters, counts)
    starts = np.repeat(lo - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    ri = rec[np.arange(total) + starts]
    d = np.hypot(*(xy[ti] - xy[ri]).T)
    keep = (d <= radius) & (ti != ri)
    ti, ri, d = ti[keep], ri[keep], d[keep]
    o = np.lexsort((ti, ri))
    return ti[o], ri[o], d[o]


def detect_contacts(
    occupants: Sequence[int],
    positions: np.ndarray,
    infectious: Sequence[bool],
    susceptible: Sequence[bool],
    place: int = 0,
    time: int = 0,
    radius: float = CONTACT_RADIUS_M,
) -> list[Contact]:
    """Contacts among the occupants of one place.

    ``positions`` gives each occupant's (x, y) in meters; the boolean
    sequences flag who can transmit and who can be infected. Every pair
    within ``radius`` yields one contact per infectious->susceptible
    direction.
    """
    occ = np.asarray(occupants, dtype=np.int64)
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    inf = np.asarray(infectious, dtype=bool)
    sus = np.asarray(susceptible, dtype=bool)
    idx = np.arange(len(occ))
    t, r, d = contact_pairs(np.zeros(len(occ), np.int64), pos, idx[inf], idx[sus], radius)
    return [Contact(time, place, int(occ[a]), int(occ[b]), float(x)) for a, b, x in zip(t, r, d)]


def transmit(
    transmitters: np.ndarray,
    receivers: np.ndarray,
    rho: np.ndarray,
    u_infect: np.ndarray,
    u_pick: np.ndarray,
) -> list[tuple[int, int]]:
    """Resolve one tick of per-contact Bernoulli trials.

    ``transmitters``/``receivers`` must be sorted by receiver then
    transmitter (as returned by :func:`contact_pairs`). A receiver with c
    contacts is infected with probability ``1 - (1 - rho)^c``, the chance
    that at least one of c independent trials succeeds, decided by its own
    uniform ``u_infect[r]``; the causal transmitter is its
    ``floor(u_pick[r] * c)``-th contact. Using one uniform per receiver makes
    infection monotone in ``rho`` under common random numbers. Returns
    (receiver, transmitter) pairs in receiver order.
    """
    if not len(receivers):
        return []
    uniq, first, c = np.unique(receivers, return_index=True, return_counts=True)
    p = 1.0 - (1.0 - rho[uniq]) ** c
    hit = u_infect[uniq] < p
    out = []
    for r, f, n in zip(uniq[hit].tolist(), first[hit].tolist(), c[hit].tolist()):
        j = min(int(u_pick[r] * n), n - 1)
        out.append((r, int(transmitters[f + j])))
    return out


# ---------------------------------------------------------------------------
# interventions


@dataclass(frozen=True)
class TestingPolicy:
    """PCR testing with contact tracing and quarantine."""

    start_day: int = 0
    cadence_days: int = 1
    target: str = "symptomatic"  # symptomatic | all
    fraction: float = 1.0
    sensitivity: float = 1.0
    specificity: float = 1.0
    trace_days: int = 5
    quarantine_days: int = 14
    trace: bool = True

    def __post_init__(self):
        if self.target not in ("symptomatic", "all"):
            raise ConfigError(f"testing.target: unknown target {self.target!r}")
        if self.cadence_days < 1:
            raise ConfigError("testing.cadence_days: must be >= 1")
        for name in ("fraction", "sensitivity", "specificity"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"testing.{name}: must lie in [0, 1]")
        if self.trace_days < 0 or self.quarantine_days < 0:
            raise ConfigError("testing: trace and quarantine windows must be non-negative")

    def due(self, day: int) -> bool:
        return day >= self.start_day and (day - self.start_day) % self.cadence_days == 0


def pcr_test(infected: np.ndarray, u: np.ndarray, policy: TestingPolicy) -> np.ndarray:
    """Test results for the tested agents.

    ``infected`` flags Exposed/Infectious status of each tested agent and
    ``u`` holds one uniform per agent. Returns the positive flags.
    """
    infected = np.asarray(infected, dtype=bool)
    return np.where(infected, u < policy.sensitivity, u >= policy.specificity)


def trace_contacts(history: Iterable[tuple[np.ndarray, np.ndarray]], positives: np.ndarray) -> np.ndarray:
    """Agents who shared a logged contact with any positive agent.

    ``history`` yields (transmitter, receiver) arrays, one pair per day in
    the lookback window. Both directions are traced.
    """
    positives = np.asarray(positives, dtype=np.int64)
    found = []
    for t, r in history:
        if not len(t):
            continue
        found.append(r[np.isin(t, positives)])
        found.append(t[np.isin(r, positives)])
    if not found:
        return np.empty(0, np.int64)
    out = np.unique(np.concatenate(found))
    return out[~np.isin(out, positives)]


@dataclass(frozen=True)
class VaccinationEvent:
    boost: float
    day: int | None = None
    threshold: float | None = None  # fraction currently infected that triggers the event
    zones: tuple[str, ...] | None = None
    classes: tuple[str, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.boost <= 1.0:
            raise ConfigError("vaccination.boost: must lie in (0, 1]")
        if (self.day is None) == (self.threshold is None):
            raise ConfigError("vaccination: give exactly one of day or threshold")


def vaccinate(gamma_vacc: np.ndarray, targets: np.ndarray, boost: float) -> np.ndarray:
    """Boosted vaccine immunity, ``min(1, gamma + boost)`` on targeted agents."""
    out = np.array(gamma_vacc, dtype=float, copy=True)
    targets = np.asarray(targets)
    out[targets] = np.minimum(1.0, out[targets] + boost)
    return out


@dataclass(frozen=True)
class ClassQuarantine:
    """Stay-at-home order for whole occupation classes."""

    classes: tuple[str, ...]
    days: int
    day: int | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.days < 1:
            raise ConfigError("class_quarantine.days: must be >= 1")
        if (self.day is None) == (self.threshold is None):
            raise ConfigError("class_quarantine: give exactly one of day or threshold")
