"""Simulation engine: daily timetables, 1-minute movement and contacts, 5-minute vector steps.

Every random draw comes from a stream keyed on what it is for (agent and
day for timetables, day for the per-minute draw block, and so on), so
paired scenarios share their randomness and the worker count used for
timetable generation never changes results.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .airborne import contact_pairs, infection_probs, pcr_test, trace_contacts, transmit, vaccinate
from .environment import ConfigError, Transport, plan_day_route
from .mobility import MINUTES_PER_DAY
from .population import Agent, generate_population
from .progression import INFECTIOUS, STATE_NAMES, SYMPTOMATIC, DiseaseState, Progression
from .rng import stream
from .scenario import Scenario
from .trajectory import ProbabilityMatrices, generate_trajectory, load_matrix_set
from .vectorborne import DEFAULT_STEP_DAYS, PatchArrays, infection_probability, vector_control

logger = logging.getLogger(__name__)

VECTOR_EVERY = 5  # minutes between vector updates
TRANSIT_LABELS = {"64", "65", "IN_TRANSIT", "UNKNOWN"}
S = int(DiseaseState.S)
E = int(DiseaseState.E)
R = int(DiseaseState.R)
D = int(DiseaseState.D)
INFECTIOUS_CODES = np.array(sorted(int(s) for s in INFECTIOUS))
SYMPTOMATIC_CODES = np.array(sorted(int(s) for s in SYMPTOMATIC))
ACTIVE_CODES = np.concatenate([[E], INFECTIOUS_CODES])

# event ordering within a minute: contacts before the exposures they cause
_PRIORITY = {"contact": 0, "exposure": 1, "transition": 2}

_builtin_cache: dict[int, dict] = {}


class SimulationError(RuntimeError):
    """A run aborted part way; the event log was flushed before raising."""


def day_type(day: int, holidays=()) -> str:
    """Days 0-4 of every week are weekdays; holidays count as weekend days."""
    return "weekend" if day % 7 >= 5 or day in holidays else "weekday"


def load_matrices_for(ref: str) -> dict[tuple[str, str, str], ProbabilityMatrices]:
    if ref == "builtin":
        if 0 not in _builtin_cache:
            from .synth import build_matrices

            _builtin_cache[0] = build_matrices()
        return _builtin_cache[0]
    try:
        return load_matrix_set(ref)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"matrices: {exc}") from None


@dataclass
class RunResult:
    """In-memory summary of a run (the files hold the full record)."""

    classes: list[str]
    states: np.ndarray  # (days, classes + 1, states); last class row is everyone
    exposures: np.ndarray  # new exposures per day, seeds excluded
    controls: list[dict] = field(default_factory=list)
    vector_totals: np.ndarray | None = None  # (days, 3) S_v, E_v, I_v summed over patches

    def series(self, state: str, cls: str = "all") -> np.ndarray:
        c = len(self.classes) if cls == "all" else self.classes.index(cls)
        return self.states[:, c, STATE_NAMES.index(state)]

    @property
    def infectious(self) -> np.ndarray:
        """I_asym + I_mild + I_sev + I_crit + Hosp, for everyone, by day."""
        cols = [STATE_NAMES.index(s) for s in ("I_asym", "I_mild", "I_sev", "I_crit", "Hosp")]
        return self.states[:, -1, cols].sum(axis=1)

    @property
    def cumulative_infections(self) -> int:
        return int(self.exposures.sum())


class EventLog:
    """Day-buffered JSON lines, written sorted by minute."""

    def __init__(self, path: Path | None):
        self.fh = open(path, "w") if path else None
        self.buffer: list[tuple[int, int, int, dict]] = []
        self.counts: dict[str, int] = {}

    def add(self, minute: int, event: dict) -> None:
        kind = event["type"]
        self.counts[kind] = self.counts.get(kind, 0) + 1
        self.buffer.append((minute, _PRIORITY.get(kind, 3), len(self.buffer), {"minute": minute, **event}))

    def flush(self) -> None:
        if self.fh:
            for *_, ev in sorted(self.buffer, key=lambda x: x[:3]):
                self.fh.write(json.dumps(ev) + "\n")
            self.fh.flush()
        self.buffer = []

    def close(self) -> None:
        self.flush()
        if self.fh:
            self.fh.close()
            self.fh = None


class Simulation:
    def __init__(self, scenario: Scenario, out_dir: str | Path | None = None, workers: int = 1):
        self.sc = scenario
        self.env = scenario.environment
        self.out = Path(out_dir) if out_dir else None
        self.workers = max(1, int(workers))
        self.seed = scenario.seed

        self.matrices = load_matrices_for(scenario.matrices)
        for c in scenario.population.classes:
            for sub in c.subclasses:
                if (c.name, sub, "weekday") not in self.matrices:
                    raise ConfigError(f"matrices: nothing for ({c.name}, {sub}, weekday)")

        self.agents: list[Agent] = generate_population(scenario.population, self.env, scenario.immunity, self.seed)
        self.n = n = len(self.agents)
        self.classes = [c.name for c in scenario.population.classes]
        self.class_idx = np.array([self.classes.index(a.occupation_class) for a in self.agents])
        self.home = np.array([a.home for a in self.agents])
        self.ages = np.array([a.age for a in self.agents], dtype=float)
        self.home_zone_name = np.array([self.env.nodes[int(z)].name for z in self.env.location_zone[self.home]])

        imm = [a.immunity for a in self.agents]
        self.S_age = np.array([i.S_age for i in imm])
        self.gamma_vacc = np.array([i.gamma_vacc for i in imm])
        self.gamma_hyg = np.array([i.gamma_hyg for i in imm])
        self._update_rho()

        self.prog = Progression(scenario.progression, self.ages, self.seed)
        self.hosp = np.zeros(n, dtype=bool)
        self.quarantine_until = np.zeros(n, dtype=np.int64)
        self.present = np.ones(n, dtype=bool)
        self.infectious = np.zeros(n, dtype=bool)
        self._label_maps: dict[tuple[int, int], np.ndarray] = {}
        self.contact_history: deque = deque(maxlen=max(1, scenario.testing.trace_days) if scenario.testing else 1)
        self.history: list[list] = [[] for _ in range(n)]
        self.fired: set[tuple[str, int]] = set()
        self.hosp_spells: list[list] = [[] for _ in range(n)]

        self.patches = None
        if scenario.pathway == "vector":
            temps = [p.temperature_C for p in self.env.patches]
            if scenario.temperature_C is not None:
                temps = scenario.temperature_C
            self.patches = PatchArrays([p.K_v for p in self.env.patches], temps, scenario.vector)
        self.controlled = np.zeros(len(self.env.patches), dtype=bool)

    # -- helpers -----------------------------------------------------------

    def _update_rho(self) -> None:
        im = self.sc.immunity
        self.rho = infection_probs(self.S_age, im.k, im.alpha_vacc, self.gamma_vacc, im.alpha_hyg, self.gamma_hyg)

    def _label_map(self, agent: int, m: ProbabilityMatrices) -> np.ndarray:
        key = (agent, id(m))
        out = self._label_maps.get(key)
        if out is None:
            a = self.agents[agent]
            out = np.array([-1 if lab in TRANSIT_LABELS else a.anchors.get(lab, a.home) for lab in m.labels],
                           dtype=np.int64)
            self._label_maps[key] = out
        return out

    def _matrix(self, agent: Agent, kind: str) -> ProbabilityMatrices:
        m = self.matrices.get((agent.occupation_class, agent.behavior_subclass, kind))
        if m is None:
            m = self.matrices[(agent.occupation_class, agent.behavior_subclass, "weekday")]
        return m

    def _agent_day(self, aid: int, day: int, kind: str):
        a = self.agents[aid]
        m = self._matrix(a, kind)
        traj = generate_trajectory(m, stream(self.seed, "trajectory", aid, day))
        lm = self._label_map(aid, m)
        stays = [(int(lm[loc]), start, dur) for loc, start, dur in traj.stays]
        pop = self.sc.population
        legs = plan_day_route(aid, stays, pop.public_prob, pop.taxi_share, stream(self.seed, "route", aid, day))
        return stays, legs

    def _timetable(self, day: int) -> tuple[np.ndarray, Transport]:
        kind = day_type(day, self.sc.holidays)
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                results = list(pool.map(lambda a: self._agent_day(a, day, kind), range(self.n)))
        else:
            results = [self._agent_day(a, day, kind) for a in range(self.n)]
        loc = np.full((MINUTES_PER_DAY, self.n), -1, dtype=np.int64)
        legs = []
        for aid, (stays, day_legs) in enumerate(results):
            for place, start, dur in stays:
                if place >= 0:
                    loc[start:start + dur, aid] = place
            legs.extend(day_legs)
        transport = Transport(self.env)
        base = len(self.env.locations)
        for leg in transport.assign(legs):
            if leg.vehicle >= 0:
                loc[leg.board:leg.end, leg.agent] = base + leg.vehicle
        return loc, transport

    def _transition(self, log: EventLog, ev) -> None:
        a = ev.agent
        new = int(ev.new)
        self.history[a].append([ev.minute, STATE_NAMES[new]])
        log.add(ev.minute, {"type": "transition", "agent": a, "from": STATE_NAMES[int(ev.old)], "to": STATE_NAMES[new]})
        self.infectious[a] = new in INFECTIOUS_CODES
        if self.hosp[a] and new in (R, D):
            self.hosp[a] = False
            self.hosp_spells[a][-1][1] = ev.minute
            log.add(ev.minute, {"type": "discharge", "agent": a, "outcome": STATE_NAMES[new]})
        if new == D:
            self.present[a] = False

    def _expose(self, log: EventLog, a: int, minute: int, **source) -> None:
        self.prog.enter(a, E, minute)
        self.history[a].append([minute, "E"])
        log.add(minute, {"type": "exposure", "agent": a, **source})

    def _counts(self) -> np.ndarray:
        s = np.where(self.hosp, int(DiseaseState.HOSP), self.prog.state.astype(np.int64))
        k = len(self.classes)
        flat = np.bincount(self.class_idx * len(STATE_NAMES) + s, minlength=k * len(STATE_NAMES))
        per_class = flat.reshape(k, len(STATE_NAMES))
        return np.vstack([per_class, per_class.sum(axis=0)])

    def _refresh_presence(self, day: int) -> None:
        self.present = ~self.hosp & (self.quarantine_until <= day) & (self.prog.state != D)

    # -- seeding -----------------------------------------------------------

    def _seed(self, log: EventLog) -> None:
        sd = self.sc.seeding
        rng = stream(self.seed, "seeding")
        if sd.infectious:
            pool = np.arange(self.n)
            if sd.infectious_class:
                pool = np.flatnonzero(self.class_idx == self.classes.index(sd.infectious_class))
            if len(pool) < sd.infectious:
                raise ConfigError("seeding.infectious: more seeds than eligible agents")
            for a in sorted(rng.choice(pool, sd.infectious, replace=False).tolist()):
                st = self.prog.seed_infectious(a, 0)
                self.infectious[a] = True
                self.history[a].append([0, STATE_NAMES[int(st)]])
                log.add(0, {"type": "exposure", "agent": a, "source": "seed", "state": STATE_NAMES[int(st)]})
        if sd.exposed_homes:
            homes = np.unique(self.home)
            if sd.home_zone:
                homes = homes[self.env.location_zone[homes] == self.env.by_name[sd.home_zone]]
            if len(homes) < sd.exposed_homes:
                raise ConfigError("seeding.exposed_homes: more homes than occupied homes in the zone")
            chosen = np.sort(rng.choice(homes, sd.exposed_homes, replace=False))
            hot = set()
            for h in chosen.tolist():
                residents = np.flatnonzero(self.home == h)[: sd.per_home]
                for a in residents.tolist():
                    self._expose(log, a, 0, source="seed")
                if self.patches is not None:
                    hot.update(self.env.nearest_patches(h, sd.hotspot_patches).tolist())
            if self.patches is not None:
                for k in sorted(hot):
                    iv = min(float(rng.integers(sd.hotspot_I_v[0], sd.hotspot_I_v[1] + 1)), self.patches.K[k])
                    self.patches.I[k] = iv
                    self.patches.S[k] = self.patches.K[k] - iv

    # -- day-start interventions ---------------------------------------------

    def _active_fraction(self) -> float:
        return float(np.isin(self.prog.state, ACTIVE_CODES).sum()) / self.n

    def _interventions(self, log: EventLog, day: int, exposures_by_day: list) -> None:
        sc, minute = self.sc, day * MINUTES_PER_DAY
        frac = self._active_fraction()
        alive = self.prog.state != D

        if self.patches is not None and sc.vector_control and day > 0 and day % sc.vector_control.n_days == 0:
            pol = sc.vector_control
            window = [z for d in exposures_by_day[max(0, day - pol.n_days):day] for z in d]
            for zone in self.env.zones:
                ids = self.env.zone_patches(zone)
                if not len(ids):
                    continue
                count = sum(1 for z in window if z == zone)
                before = np.stack([self.patches.S[ids], self.patches.E[ids], self.patches.I[ids]])
                if vector_control(self.patches, ids, count, pol):
                    after = np.stack([self.patches.S[ids], self.patches.E[ids], self.patches.I[ids]])
                    self.controlled[ids] = True
                    rec = {"type": "vector_control", "day": day, "zone": self.env.nodes[zone].name,
                           "exposed": count, "factor": 1.0 - pol.m_pct / 100.0,
                           "before": before.sum(axis=1).tolist(), "after": after.sum(axis=1).tolist()}
                    log.add(minute, rec)
                    self.controls.append({**rec, "before_patches": before, "after_patches": after})

        for i, ev in enumerate(sc.vaccinations):
            if ("vacc", i) in self.fired:
                continue
            if (ev.day is not None and day >= ev.day) or (ev.threshold is not None and frac >= ev.threshold):
                self.fired.add(("vacc", i))
                mask = alive.copy()
                if ev.classes:
                    mask &= np.isin(self.class_idx, [self.classes.index(c) for c in ev.classes])
                if ev.zones:
                    mask &= np.isin(self.home_zone_name, list(ev.zones))
                targets = np.flatnonzero(mask)
                self.gamma_vacc = vaccinate(self.gamma_vacc, targets, ev.boost)
                self._update_rho()
                log.add(minute, {"type": "vaccination", "day": day, "boost": ev.boost, "agents": len(targets),
                                 "infected_fraction": frac})

        for i, q in enumerate(sc.class_quarantines):
            if ("quar", i) in self.fired:
                continue
            if (q.day is not None and day >= q.day) or (q.threshold is not None and frac >= q.threshold):
                self.fired.add(("quar", i))
                targets = np.flatnonzero(np.isin(self.class_idx, [self.classes.index(c) for c in q.classes]) & alive)
                self.quarantine_until[targets] = np.maximum(self.quarantine_until[targets], day + q.days)
                log.add(minute, {"type": "quarantine", "reason": "class", "classes": list(q.classes),
                                 "agents": len(targets), "until_day": day + q.days})

        tp = sc.testing
        if tp is not None and tp.due(day):
            u = stream(self.seed, "testing", day).random((self.n, 2))
            cand = alive & ~self.hosp & (self.quarantine_until <= day)
            if tp.target == "symptomatic":
                cand &= np.isin(self.prog.state, SYMPTOMATIC_CODES)
            tested = np.flatnonzero(cand & (u[:, 0] < tp.fraction))
            if len(tested):
                infected = np.isin(self.prog.state[tested], ACTIVE_CODES)
                pos = tested[pcr_test(infected, u[tested, 1], tp)]
                log.add(minute, {"type": "test", "day": day, "tested": len(tested), "positive": pos.tolist()})
                traced = trace_contacts(self.contact_history, pos) if tp.trace else np.empty(0, np.int64)
                traced = traced[alive[traced] & ~self.hosp[traced] & (self.quarantine_until[traced] <= day)]
                until = day + tp.quarantine_days
                for a in pos.tolist():
                    self.quarantine_until[a] = max(self.quarantine_until[a], until)
                    log.add(minute, {"type": "quarantine", "reason": "positive", "agent": a, "until_day": until})
                for a in traced.tolist():
                    self.quarantine_until[a] = max(self.quarantine_until[a], until)
                    log.add(minute, {"type": "quarantine", "reason": "traced", "agent": a, "until_day": until})

        pol = sc.hospital
        u = stream(self.seed, "hospital", day).random(self.n)
        p = np.zeros(self.n)
        st = self.prog.state
        p[st == int(DiseaseState.I_MILD)] = pol.p_mild
        p[st == int(DiseaseState.I_SEV)] = pol.p_severe
        p[st == int(DiseaseState.I_CRIT)] = pol.p_critical
        admit = np.flatnonzero(~self.hosp & (u < p))
        if pol.capacity is not None:
            admit = admit[: max(0, pol.capacity - int(self.hosp.sum()))]
        for a in admit.tolist():
            self.hosp[a] = True
            self.hosp_spells[a].append([minute, None])
            log.add(minute, {"type": "hospitalization", "agent": a, "state": STATE_NAMES[int(st[a])]})

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        sc, n = self.sc, self.n
        self.controls: list[dict] = []
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)
        log = EventLog(self.out / "events.jsonl" if self.out else None)
        states_rows, patch_rows = [], []
        state_counts = np.zeros((sc.days, len(self.classes) + 1, len(STATE_NAMES)), dtype=np.int64)
        exposures = np.zeros(sc.days, dtype=np.int64)
        exposures_by_zone: list[list[int]] = []
        vec_totals = np.zeros((sc.days, 3)) if self.patches is not None else None
        base = len(self.env.locations)
        loc_patch = self.env.location_patch
        home_patch = loc_patch[self.home]
        per_pair = sc.trials == "per_pair_day"
        try:
            self._seed(log)
            log.flush()
            for day in range(sc.days):
                t0 = day * MINUTES_PER_DAY
                self._interventions(log, day, exposures_by_zone)
                self._refresh_presence(day)
                loc, transport = self._timetable(day)
                n_places = base + len(transport.vehicles)
                footprint = np.vstack([self.env.footprints, transport.footprints()])
                place_patch = np.concatenate([loc_patch, np.full(len(transport.vehicles), -1)])
                if self.patches is not None:
                    self.patches.draw_incubation(stream(self.seed, "incubation", day).random(len(self.patches)))
                rng = stream(self.seed, "tick", day)
                day_contacts = []
                tried: set[int] = set()
                zones_today: list[int] = []
                for m in range(MINUTES_PER_DAY):
                    now = t0 + m
                    for ev in self.prog.step(now):
                        self._transition(log, ev)
                    block = rng.random((n, 5))
                    places = np.where(self.present, loc[m], -1)

                    if sc.pathway == "airborne":
                        tx = np.flatnonzero(self.infectious & (places >= 0))
                        if len(tx):
                            rx = np.flatnonzero((self.prog.state == S) & (places >= 0))
                            xy = block[:, :2] * footprint[np.maximum(places, 0)]
                            t_idx, r_idx, dist = contact_pairs(places, xy, tx, rx)
                            if len(t_idx):
                                day_contacts.append((t_idx, r_idx, places[r_idx], np.full(len(t_idx), m), dist))
                                if per_pair:
                                    keys = t_idx * n + r_idx
                                    fresh = np.array([k not in tried for k in keys.tolist()])
                                    tried.update(keys.tolist())
                                    t_idx, r_idx = t_idx[fresh], r_idx[fresh]
                                for r, t in transmit(t_idx, r_idx, self.rho, block[:, 2], block[:, 3]):
                                    pl = int(places[r])
                                    self._expose(log, r, now, source="contact", transmitter=t, place=pl)
                                    exposures[day] += 1
                                    if pl < base:
                                        zones_today.append(int(self.env.location_zone[pl]))

                    elif m % VECTOR_EVERY == 0:
                        pp = np.where(places >= 0, place_patch[np.clip(places, 0, n_places - 1)], -1)
                        quarantined = ~self.hosp & (self.quarantine_until > day) & (self.prog.state != D)
                        pp = np.where(quarantined, home_patch, pp)
                        there = pp >= 0
                        kp = len(self.patches)
                        N_h = np.bincount(pp[there], minlength=kp)
                        I_h = np.bincount(pp[there & self.infectious], minlength=kp)
                        lam_v, lam_h = self.patches.forces(N_h, I_h)
                        sus = np.flatnonzero(there & (self.prog.state == S))
                        if len(sus):
                            prob = infection_probability(lam_h[pp[sus]], DEFAULT_STEP_DAYS)
                            for a in sus[block[sus, 4] < prob].tolist():
                                k = int(pp[a])
                                self._expose(log, a, now, source="vector", patch=k)
                                exposures[day] += 1
                                zones_today.append(int(self.env.patch_zone[k]))
                        self.patches.step(lam_v, DEFAULT_STEP_DAYS)


                exposures_by_zone.append(zones_today)
                self._log_contacts(log, day, day_contacts, base, transport)
                counts = self._counts()
                state_counts[day] = counts
                for c, name in enumerate(self.classes + ["all"]):
                    states_rows.append([day, name, *counts[c].tolist()])
                if self.patches is not None:
                    P = self.patches
                    vec_totals[day] = [P.S.sum(), P.E.sum(), P.I.sum()]
                    for k in range(len(P)):
                        patch_rows.append([day, k, self.env.nodes[int(self.env.patch_zone[k])].name,
                                           repr(float(P.S[k])), repr(float(P.E[k])), repr(float(P.I[k])),
                                           repr(float(P.T[k])), repr(float(P.K[k])), int(self.controlled[k])])
                    self.controlled[:] = False
                log.flush()
        except ConfigError:
            log.close()
            raise
        except Exception as exc:
            log.close()
            raise SimulationError(f"run aborted: {exc}") from exc
        log.close()
        if self.out:
            self._write_outputs(states_rows, patch_rows)
        return RunResult(self.classes, state_counts, exposures, self.controls, vec_totals)

    def _log_contacts(self, log: EventLog, day: int, chunks, base: int, transport: Transport) -> None:
        if not chunks:
            self.contact_history.append((np.empty(0, np.int64), np.empty(0, np.int64)))
            return
        t, r, pl, mins, dist = (np.concatenate(x) for x in zip(*chunks))
        keys = np.stack([t, r, pl])
        uniq, first, inv = np.unique(keys, axis=1, return_index=True, return_inverse=True)
        inv = inv.ravel()
        minutes = np.bincount(inv)
        nearest = np.full(uniq.shape[1], np.inf)
        np.minimum.at(nearest, inv, dist)
        firstmin = np.full(uniq.shape[1], MINUTES_PER_DAY)
        np.minimum.at(firstmin, inv, mins)
        self.contact_history.append((uniq[0], uniq[1]))
        if not self.sc.contact_events:
            return
        t0 = day * MINUTES_PER_DAY
        for j in range(uniq.shape[1]):
            place = int(uniq[2, j])
            ev = {"type": "contact", "transmitter": int(uniq[0, j]), "receiver": int(uniq[1, j]),
                  "place": place, "minutes": int(minutes[j]), "min_distance_m": round(float(nearest[j]), 6)}
            if place >= base:
                ev["vehicle"] = transport.vehicles[place - base].kind
            log.add(t0 + int(firstmin[j]), ev)

    def _write_outputs(self, states_rows, patch_rows) -> None:
        with open(self.out / "states.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["day", "class", *STATE_NAMES])
            w.writerows(states_rows)
        with open(self.out / "patches.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["day", "patch", "zone", "S_v", "E_v", "I_v", "T", "K_v", "control"])
            w.writerows(patch_rows)
        env = self.env
        with open(self.out / "agents.jsonl", "w") as fh:
            for a in self.agents:
                rec = {
                    "agent": a.agent_id, "class": a.occupation_class, "subclass": a.behavior_subclass,
                    "age": a.age, "home": env.nodes[env.locations[a.home]].name,
                    "work": env.nodes[env.locations[a.work]].name if a.work >= 0 else None,
                    "gamma_vacc": float(self.gamma_vacc[a.agent_id]),
                    "gamma_hyg": round(float(self.gamma_hyg[a.agent_id]), 6),
                    "history": self.history[a.agent_id],
                    "hospital": self.hosp_spells[a.agent_id],
                }
                fh.write(json.dumps(rec) + "\n")


def run(scenario: Scenario, out_dir: str | Path | None = None, workers: int = 1) -> RunResult:
    return Simulation(scenario, out_dir, workers).run()
