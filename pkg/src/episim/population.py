"""Agents: occupation, behavior sub-class, age, home, work, and anchor places."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .airborne import AgentImmunity
from .environment import ConfigError, Environment
from .rng import stream
from .scenario import ImmunitySpec, PopulationSpec


@dataclass
class Agent:
    agent_id: int
    occupation_class: str
    behavior_subclass: str
    age: int
    home: int  # place index
    work: int  # place index, -1 for none
    immunity: AgentImmunity
    anchors: dict[str, int] = field(default_factory=dict)  # location kind -> place

    def place_for(self, kind: str) -> int:
        return self.anchors.get(kind, -1)


def apportion(total: int, weights: dict[str, float]) -> dict[str, int]:
    """Largest-remainder split of ``total`` by ``weights``; ties go to the earlier key."""
    keys = list(weights)
    w = np.array([weights[k] for k in keys], dtype=float)
    if total < 0 or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("need a non-negative total and non-negative weights with positive sum")
    quota = total * w / w.sum()
    base = np.floor(quota).astype(int)
    rest = total - int(base.sum())
    order = sorted(range(len(keys)), key=lambda i: (-(quota[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return {k: int(b) for k, b in zip(keys, base)}


def s_age_of(age: float, spec: ImmunitySpec) -> float:
    i = int(np.searchsorted(spec.s_age_bands, age, side="right")) - 1
    return float(spec.s_age_values[max(i, 0)])


def _pick(rng, options: np.ndarray, *preferences: np.ndarray) -> int:
    """Random member of the first non-empty preference subset, else of ``options``."""
    for mask in preferences:
        sub = options[mask]
        if len(sub):
            return int(sub[int(rng.integers(len(sub)))])
    return int(options[int(rng.integers(len(options)))])


def generate_population(
    spec: PopulationSpec, env: Environment, immunity: ImmunitySpec, seed: int
) -> list[Agent]:
    """Create the agents of ``spec`` in class order.

    Homes are filled round-robin over a shuffled home list, so households
    hold ``size / homes`` people on average. Work places are drawn from the
    home city with probability ``spec.local_work``, otherwise from anywhere.
    Every other location kind gets one fixed anchor per agent, preferring the
    home zone (for hangouts) or the home city.
    """
    homes = env.places_of_kind("home")
    if not len(homes):
        raise ConfigError("environment: no home locations")
    kinds = sorted(set(env.location_kind.tolist()) - {"home"})
    by_kind = {k: env.places_of_kind(k) for k in kinds}
    for c in spec.classes:
        if c.work is not None and not len(by_kind.get(c.work, ())):
            raise ConfigError(f"population.classes.{c.name}.work: no {c.work!r} locations")

    rng = stream(seed, "population")
    home_order = rng.permutation(homes)
    agents: list[Agent] = []
    for c in spec.classes:
        split = apportion(c.count, c.subclasses)
        subs = [s for s, n in split.items() for _ in range(n)]
        for sub in subs:
            aid = len(agents)
            arng = stream(seed, "agent", aid)
            age = int(arng.integers(c.age[0], c.age[1] + 1))
            home = int(home_order[aid % len(home_order)])
            hz, hc = env.location_zone[home], env.location_city[home]
            anchors = {"home": home}
            for kind in kinds:
                opts = by_kind[kind]
                anchors[kind] = _pick(arng, opts, env.location_zone[opts] == hz,
                                      env.location_city[opts] == hc)
            work = -1
            if c.work is not None:
                opts = by_kind[c.work]
                local = arng.random() < spec.local_work
                prefs = (env.location_city[opts] == hc,) if local else ()
                work = _pick(arng, opts, *prefs)
                anchors[c.work] = work
            gh = immunity.gamma_hyg
            gamma_hyg = float(gh[0] + (gh[1] - gh[0]) * arng.random())
            imm = AgentImmunity(s_age_of(age, immunity), immunity.alpha_vacc, immunity.alpha_hyg,
                                immunity.gamma_vacc, gamma_hyg, immunity.k)
            agents.append(Agent(aid, c.name, sub, age, home, work, imm, anchors))
    return agents
