"""Markov disease progression with branch probabilities and log-normal stay times.

A progression table maps each non-absorbing state to a list of branches
(next state, probability, median days, log-space dispersion), optionally
varying by age band. Hospitalization is tracked as a flag next to the
Markov state: a hospitalized agent keeps progressing and is reported as
``Hosp`` until it recovers or dies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .environment import ConfigError
from .rng import stream

MINUTES_PER_DAY = 1440
NEVER = np.iinfo(np.int64).max


class DiseaseState(IntEnum):
    S = 0
    E = 1
    I_ASYM = 2
    I_MILD = 3
    I_SEV = 4
    I_CRIT = 5
    HOSP = 6  # reporting only; never a Markov state
    R = 7
    D = 8


STATE_NAMES = ["S", "E", "I_asym", "I_mild", "I_sev", "I_crit", "Hosp", "R", "D"]
_BY_NAME = {n.lower(): DiseaseState(i) for i, n in enumerate(STATE_NAMES)}
_BY_NAME.update({
    "susceptible": DiseaseState.S, "exposed": DiseaseState.E,
    "infectious_asymptomatic": DiseaseState.I_ASYM, "infectious_mild": DiseaseState.I_MILD,
    "infectious_severe": DiseaseState.I_SEV, "infectious_critical": DiseaseState.I_CRIT,
    "hospitalized": DiseaseState.HOSP, "recovered": DiseaseState.R, "dead": DiseaseState.D,
})

INFECTIOUS = (DiseaseState.I_ASYM, DiseaseState.I_MILD, DiseaseState.I_SEV, DiseaseState.I_CRIT)
SYMPTOMATIC = (DiseaseState.I_MILD, DiseaseState.I_SEV, DiseaseState.I_CRIT)
ABSORBING = (DiseaseState.R, DiseaseState.D)


def state_of(name: str | int | DiseaseState) -> DiseaseState:
    if isinstance(name, (int, DiseaseState)):
        return DiseaseState(name)
    try:
        return _BY_NAME[str(name).lower()]
    except KeyError:
        raise ConfigError(f"unknown disease state {name!r}") from None


def is_absorbing(state) -> bool:
    return DiseaseState(state) in ABSORBING


@dataclass
class Branch:
    to: DiseaseState
    p: np.ndarray  # per age band
    median: np.ndarray  # days, per age band
    sigma: np.ndarray  # log-space dispersion, per age band


@dataclass
class ProgressionTable:
    disease: str
    bands: np.ndarray  # lower age bound of each band, ascending, first is 0
    transitions: dict[DiseaseState, list[Branch]] = field(default_factory=dict)

    def band_of(self, age: float) -> int:
        return int(np.searchsorted(self.bands, age, side="right") - 1)

    def edges(self) -> set[tuple[DiseaseState, DiseaseState]]:
        return {(s, b.to) for s, branches in self.transitions.items() for b in branches
                if np.any(b.p > 0)}

    def validate(self, tol: float = 1e-9) -> None:
        nb = len(self.bands)
        if nb == 0 or self.bands[0] != 0 or np.any(np.diff(self.bands) <= 0):
            raise ConfigError(f"{self.disease}: age bands must start at 0 and increase")
        if DiseaseState.E not in self.transitions:
            raise ConfigError(f"{self.disease}: no branches out of E")
        for s, branches in self.transitions.items():
            where = f"{self.disease}.{STATE_NAMES[s]}"
            if s in ABSORBING or s in (DiseaseState.S, DiseaseState.HOSP):
                raise ConfigError(f"{where}: state cannot have outgoing branches")
            if not branches:
                raise ConfigError(f"{where}: empty branch list")
            for b in branches:
                if b.to in (DiseaseState.S, DiseaseState.E, DiseaseState.HOSP):
                    raise ConfigError(f"{where}: branch to {STATE_NAMES[b.to]} not allowed")
                for name in ("p", "median", "sigma"):
                    if getattr(b, name).shape != (nb,):
                        raise ConfigError(f"{where}->{STATE_NAMES[b.to]}.{name}: expected {nb} band values")
                if np.any(b.p < 0) or np.any(b.p > 1):
                    raise ConfigError(f"{where}->{STATE_NAMES[b.to]}.p: outside [0, 1]")
                if np.any(b.median <= 0):
                    raise ConfigError(f"{where}->{STATE_NAMES[b.to]}.median: must be positive")
                if np.any(b.sigma <= 0):
                    raise ConfigError(f"{where}->{STATE_NAMES[b.to]}.sigma: must be positive")
            total = np.sum([b.p for b in branches], axis=0)
            if np.any(np.abs(total - 1.0) > tol):
                raise ConfigError(f"{where}: branch probabilities sum to {total.tolist()}, not 1")
        # every reachable non-absorbing state needs its own branches
        todo, seen = [DiseaseState.E], set()
        while todo:
            s = todo.pop()
            if s in seen:
                continue
            seen.add(s)
            for b in self.transitions.get(s, []):
                if b.to not in ABSORBING:
                    if b.to not in self.transitions:
                        raise ConfigError(f"{self.disease}: state {STATE_NAMES[b.to]} reachable but has no branches")
                    todo.append(b.to)


def _bands(value, nb: int, where: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape == (1,):
        arr = np.repeat(arr, nb)
    if arr.shape != (nb,):
        raise ConfigError(f"{where}: expected a scalar or {nb} band values")
    return arr


def parse_table(doc: dict[str, Any]) -> ProgressionTable:
    if not isinstance(doc, dict):
        raise ConfigError("progression: expected a mapping")
    disease = str(doc.get("disease", "disease"))
    bands = np.asarray(doc.get("age_bands", [0]), dtype=float)
    nb = len(bands)
    trans: dict[DiseaseState, list[Branch]] = {}
    for src, branches in (doc.get("transitions") or {}).items():
        s = state_of(src)
        out = []
        for i, b in enumerate(branches or []):
            where = f"{disease}.transitions.{src}[{i}]"
            try:
                out.append(Branch(state_of(b["to"]), _bands(b["p"], nb, where + ".p"),
                                  _bands(b["median"], nb, where + ".median"),
                                  _bands(b["sigma"], nb, where + ".sigma")))
            except KeyError as exc:
                raise ConfigError(f"{where}: missing {exc.args[0]!r}") from None
        trans[s] = out
    table = ProgressionTable(disease, bands, trans)
    table.validate()
    return table


def load_table(path: str | Path) -> ProgressionTable:
    with open(path) as fh:
        try:
            return parse_table(yaml.safe_load(fh))
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def builtin_table(disease: str) -> ProgressionTable:
    path = Path(__file__).parent / "data" / f"progression_{disease}.yaml"
    if not path.exists():
        raise ConfigError(f"no built-in progression table for {disease!r}")
    return load_table(path)


def days_to_minutes(days: float) -> int:
    return max(1, int(math.ceil(days * MINUTES_PER_DAY - 1e-9)))


def sample_transition(
    state, age: float, table: ProgressionTable, rng: np.random.Generator
) -> tuple[DiseaseState, float]:
    """Next state and the time (days) spent in ``state`` before moving there.

    Exactly one uniform and one standard normal are drawn per call.
    """
    state = DiseaseState(state)
    if state in ABSORBING:
        raise ValueError(f"{STATE_NAMES[state]} is absorbing")
    branches = table.transitions.get(state)
    if not branches:
        raise ValueError(f"no branches out of {STATE_NAMES[state]}")
    band = table.band_of(age)
    u, z = rng.random(), rng.standard_normal()
    cum = np.cumsum([b.p[band] for b in branches])
    i = min(int(np.searchsorted(cum, u * cum[-1], side="right")), len(branches) - 1)
    b = branches[i]
    return b.to, float(b.median[band] * math.exp(b.sigma[band] * z))


@dataclass
class TransitionEvent:
    agent: int
    minute: int  # absolute simulation minute
    old: DiseaseState
    new: DiseaseState


class Progression:
    """Disease state of every agent, as parallel arrays.

    Each agent's k-th sampled transition uses the stream keyed on
    (seed, agent, k), so the same agent walks the same path whenever it
    enters the same states, regardless of what other agents do.
    """

    def __init__(self, table: ProgressionTable, ages: Sequence[float], seed: int):
        self.table = table
        self.ages = np.asarray(ages, dtype=float)
        self.seed = seed
        n = len(self.ages)
        self.state = np.zeros(n, dtype=np.int8)
        self.entered = np.zeros(n, dtype=np.int64)
        self.exit_at = np.full(n, NEVER, dtype=np.int64)
        self.next_state = np.full(n, -1, dtype=np.int8)
        self.count = np.zeros(n, dtype=np.int64)
        self.next_due = NEVER

    def __len__(self):
        return len(self.state)

    def _schedule(self, agent: int, now: int) -> None:
        s = DiseaseState(int(self.state[agent]))
        if s in ABSORBING:
            self.exit_at[agent] = NEVER
            self.next_state[agent] = -1
            return
        rng = stream(self.seed, "progress", agent, int(self.count[agent]))
        self.count[agent] += 1
        nxt, days = sample_transition(s, self.ages[agent], self.table, rng)
        self.exit_at[agent] = now + days_to_minutes(days)
        self.next_state[agent] = int(nxt)
        self.next_due = min(self.next_due, int(self.exit_at[agent]))

    def enter(self, agent: int, state, now: int) -> None:
        self.state[agent] = int(state)
        self.entered[agent] = now
        self._schedule(agent, now)

    def seed_infectious(self, agent: int, now: int) -> DiseaseState:
        """Start ``agent`` in the infectious state its exposure would lead to."""
        rng = stream(self.seed, "progress-seed", agent)
        state, _ = sample_transition(DiseaseState.E, self.ages[agent], self.table, rng)
        self.enter(agent, state, now)
        return state

    def step(self, now: int) -> list[TransitionEvent]:
        """Apply every transition due at or before ``now``, in agent-id order."""
        if now < self.next_due:
            return []
        events = []
        while True:
            due = np.flatnonzero(self.exit_at <= now)
            if not len(due):
                break
            for a in due.tolist():
                old = DiseaseState(int(self.state[a]))
                new = DiseaseState(int(self.next_state[a]))
                when = int(self.exit_at[a])
                self.state[a] = int(new)
                self.entered[a] = when
                self._schedule(a, when)
                events.append(TransitionEvent(a, when, old, new))
        self.next_due = int(self.exit_at.min()) if len(self.exit_at) else NEVER
        return events

    def counts(self, hospitalized: np.ndarray | None = None) -> np.ndarray:
        s = self.state.astype(np.int64)
        if hospitalized is not None:
            s = np.where(hospitalized, int(DiseaseState.HOSP), s)
        return np.bincount(s, minlength=len(STATE_NAMES))


def step_progression(prog: Progression, agent: int, now: int) -> TransitionEvent | None:
    """Single-agent form of :meth:`Progression.step`."""
    if prog.exit_at[agent] > now:
        return None
    old = DiseaseState(int(prog.state[agent]))
    new = DiseaseState(int(prog.next_state[agent]))
    when = int(prog.exit_at[agent])
    prog.state[agent] = int(new)
    prog.entered[agent] = when
    prog._schedule(agent, when)
    return TransitionEvent(agent, when, old, new)


@dataclass(frozen=True)
class HospitalPolicy:
    p_mild: float = 0.05
    p_severe: float = 0.5
    p_critical: float = 1.0
    capacity: int | None = None

    def __post_init__(self):
        for name in ("p_mild", "p_severe", "p_critical"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"hospital.{name}: must lie in [0, 1]")
        if self.capacity is not None and self.capacity < 0:
            raise ConfigError("hospital.capacity: must be non-negative")

    def probability(self, state) -> float:
        state = DiseaseState(state)
        if state == DiseaseState.I_MILD:
            return self.p_mild
        if state == DiseaseState.I_SEV:
            return self.p_severe
        if state == DiseaseState.I_CRIT:
            return self.p_critical
        return 0.0


def hospitalize_check(state, policy: HospitalPolicy, u: float) -> bool:
    """Whether a non-hospitalized agent is admitted today; ``u`` is uniform."""
    return u < policy.probability(state)
