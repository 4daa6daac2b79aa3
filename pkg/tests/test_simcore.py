import csv
import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from episim import simcore
from episim.cli import main
from episim.environment import ConfigError
from episim.mobility import dbscan, project
from episim.population import apportion
from episim.progression import builtin_table
from episim.scenario import builtin_scenario, load_scenario, parse_scenario
from episim.simcore import STATE_NAMES, Simulation, SimulationError, day_type
from episim.synth import DEFAULT_PROFILES, ORIGIN, synth_gps


TINY_ENV = str(Path(__file__).parent / "data" / "tiny_env.yaml")


def small_doc(**over):
    doc = {
        "name": "small",
        "environment": TINY_ENV,
        "seed": 3,
        "days": 3,
        "disease": "covid",
        "population": {"classes": {
            "student": {"count": 30, "subclasses": {"regular": 0.7, "irregular": 0.3}},
            "teacher": {"count": 6},
            "doctor": {"count": 10, "subclasses": {"day_shift": 0.7, "night_shift": 0.3}},
            "homemaker": {"count": 14},
        }},
        "immunity": {"k": 0.9, "alpha_vacc": 0.8, "alpha_hyg": 0.2, "gamma_hyg": [0.0, 0.0]},
        "seeding": {"infectious": 4, "infectious_class": "student"},
    }
    for k, v in over.items():
        if v is None:
            doc.pop(k, None)
        else:
            doc[k] = v
    return doc


def small_dengue(**over):
    base = {"disease": "dengue", "seeding": {"exposed_homes": 2, "per_home": 3, "hotspot_patches": 4,
                                             "hotspot_I_v": [20, 40]},
            "vector": {"sigma_h": 10.0, "beta_hv": 0.9, "beta_vh": 0.9}}
    base.update(over)
    return small_doc(**base)


def run_doc(doc, out, workers=1):
    return Simulation(parse_scenario(doc), out, workers).run()


def read_events(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh]


def read_states(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def covid_small(tmp_path_factory):
    out = tmp_path_factory.mktemp("covid")
    doc = small_doc(days=4, hospital={"p_mild": 0.3, "p_severe": 1.0, "p_critical": 1.0},
                    testing={"start_day": 1, "cadence_days": 1, "target": "all", "fraction": 1.0,
                             "sensitivity": 1.0, "specificity": 1.0, "trace_days": 2, "quarantine_days": 5})
    res = run_doc(doc, out)
    return res, out


@pytest.fixture(scope="module")
def dengue_small(tmp_path_factory):
    out = tmp_path_factory.mktemp("dengue")
    return run_doc(small_dengue(days=3), out), out


def test_day_type_calendar():
    assert [day_type(d) for d in range(7)] == ["weekday"] * 5 + ["weekend"] * 2
    assert day_type(2, holidays=(2,)) == "weekend"


def test_builtin_population_size():
    sim = Simulation(load_scenario(builtin_scenario("covid_uncontrolled")))
    assert sim.n == 2000
    doctors = Counter(a.behavior_subclass for a in sim.agents if a.occupation_class == "doctor")
    assert doctors == {"day_shift": 28, "night_shift": 12}


def test_subclass_apportionment():
    assert apportion(100, {"day_shift": 0.7, "night_shift": 0.3}) == {"day_shift": 70, "night_shift": 30}
    assert apportion(3, {"a": 1, "b": 1}) == {"a": 2, "b": 1}
    assert sum(apportion(61, {"a": 0.33, "b": 0.33, "c": 0.34}).values()) == 61


def test_population_rejects_missing_work_kind(tmp_path):
    env = {"cities": ["C"], "zones": [{"name": "z", "city": "C", "rect": [0, 0, 500, 500]}],
           "locations": [{"name": "h", "zone": "z", "kind": "home"}]}
    (tmp_path / "env.yaml").write_text(json.dumps(env))
    with pytest.raises(ConfigError, match="school"):
        parse_scenario({**small_doc(), "environment": str(tmp_path / "env.yaml")})


def test_no_seeds_everyone_stays_susceptible(tmp_path):
    res = run_doc(small_doc(days=2, seeding=None), tmp_path)
    assert res.states[-1, -1, STATE_NAMES.index("S")] == 60
    res = run_doc(small_dengue(days=2, seeding=None), tmp_path / "d")
    assert res.states[-1, -1, STATE_NAMES.index("S")] == 60


def test_three_seeded_students(tmp_path):
    run_doc(small_doc(days=1, seeding={"infectious": 3, "infectious_class": "student"}), tmp_path)
    seeds = [e for e in read_events(tmp_path / "events.jsonl") if e.get("source") == "seed"]
    agents = {r["agent"]: r for r in map(json.loads, open(tmp_path / "agents.jsonl"))}
    assert len(seeds) == 3
    assert all(agents[e["agent"]]["class"] == "student" for e in seeds)
    assert all(e["state"].startswith("I_") for e in seeds)


def test_population_conservation(covid_small, dengue_small):
    for res, out in (covid_small, dengue_small):
        for row in read_states(out / "states.csv"):
            total = sum(int(row[s]) for s in STATE_NAMES)
            want = 60 if row["class"] == "all" else {"student": 30, "teacher": 6, "doctor": 10,
                                                     "homemaker": 14}[row["class"]]
            assert total == want
        assert (res.states.sum(axis=2)[:, -1] == 60).all()


def test_output_columns(covid_small):
    _, out = covid_small
    with open(out / "states.csv") as fh:
        assert fh.readline().strip() == "day,class,S,E,I_asym,I_mild,I_sev,I_crit,Hosp,R,D"
    with open(out / "patches.csv") as fh:
        assert fh.readline().startswith("day,patch,zone,S_v,E_v,I_v")


def test_events_time_ordered(covid_small, dengue_small):
    for _, out in (covid_small, dengue_small):
        minutes = [e["minute"] for e in read_events(out / "events.jsonl")]
        assert minutes == sorted(minutes)


def test_causal_closure_airborne(covid_small):
    _, out = covid_small
    events = read_events(out / "events.jsonl")
    seen_contacts = set()
    exposures = 0
    for e in events:
        if e["type"] == "contact":
            seen_contacts.add((e["transmitter"], e["receiver"], e["place"]))
        elif e["type"] == "exposure" and e["source"] != "seed":
            exposures += 1
            assert e["source"] == "contact"
            assert (e["transmitter"], e["agent"], e["place"]) in seen_contacts
    assert exposures > 0


def test_causal_closure_vector(dengue_small):
    _, out = dengue_small
    rows = read_states(out / "patches.csv")
    infectious = {(int(r["day"]), int(r["patch"])) for r in rows if float(r["I_v"]) > 0}
    vec = [e for e in read_events(out / "events.jsonl") if e["type"] == "exposure" and e["source"] != "seed"]
    assert vec
    for e in vec:
        assert e["source"] == "vector"
        assert (e["minute"] // 1440, e["patch"]) in infectious


def test_transitions_follow_table(covid_small):
    _, out = covid_small
    table_edges = {(STATE_NAMES[int(a)], STATE_NAMES[int(b)]) for a, b in builtin_table("covid").edges()}
    got = {(e["from"], e["to"]) for e in read_events(out / "events.jsonl") if e["type"] == "transition"}
    assert got and got <= table_edges


def test_hospitalized_and_quarantined_have_no_contacts(covid_small):
    _, out = covid_small
    events = read_events(out / "events.jsonl")
    absent = set()  # (day, agent)
    agents = [json.loads(l) for l in open(out / "agents.jsonl")]
    for a in agents:
        for start, end in a["hospital"]:
            last = (end if end is not None else 10**9) // 1440
            for d in range(start // 1440, min(last, 10) + 1):
                absent.add((d, a["agent"]))
    quarantined = 0
    for e in events:
        if e["type"] == "quarantine" and "agent" in e:
            quarantined += 1
            for d in range(e["minute"] // 1440, e["until_day"]):
                absent.add((d, e["agent"]))
    assert absent and quarantined
    for e in events:
        if e["type"] == "contact":
            d = e["minute"] // 1440
            assert (d, e["transmitter"]) not in absent
            assert (d, e["receiver"]) not in absent


def test_no_vector_exposures_without_transmission(tmp_path):
    doc = small_dengue(days=2, vector={"beta_hv": 0.0})
    run_doc(doc, tmp_path)
    assert not [e for e in read_events(tmp_path / "events.jsonl") if e.get("source") == "vector"]


def test_patch_counts_non_negative(dengue_small):
    _, out = dengue_small
    for r in read_states(out / "patches.csv"):
        assert min(float(r["S_v"]), float(r["E_v"]), float(r["I_v"])) >= 0.0


def test_thread_count_does_not_change_outputs(tmp_path):
    for w in (1, 3):
        run_doc(small_doc(days=2), tmp_path / f"w{w}", workers=w)
    for f in ("states.csv", "events.jsonl", "patches.csv", "agents.jsonl"):
        assert (tmp_path / "w1" / f).read_bytes() == (tmp_path / "w3" / f).read_bytes()


@pytest.mark.parametrize("bad, match", [
    ({"bogus": 1}, "unknown keys"),
    ({"pathway": "water"}, "pathway"),
    ({"days": 0}, "days"),
    ({"trials": "sometimes"}, "trials"),
    ({"immunity": {"alpha_vacc": 0.9, "alpha_hyg": 0.5, "gamma_hyg": [0, 0.5]}}, "alpha"),
    ({"seeding": {"infectious": 1, "infectious_class": "pilot"}}, "infectious_class"),
    ({"population": {"classes": {"pilot": {"count": 3}}}}, "unknown class"),
    ({"class_quarantine": [{"classes": ["pilot"], "days": 3, "day": 1}]}, "class_quarantine"),
    ({"vaccination": [{"boost": 0.5, "day": 1, "zones": ["atlantis"]}]}, "vaccination"),
    ({"population": {"classes": {"student": {"count": 0}}}}, "at least one agent"),
])
def test_config_errors(bad, match):
    with pytest.raises(ConfigError, match=match):
        parse_scenario(small_doc(**bad))


def test_extends_cycle_rejected(tmp_path):
    (tmp_path / "a.yaml").write_text("extends: b.yaml\n")
    (tmp_path / "b.yaml").write_text("extends: a.yaml\n")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "a.yaml")


def test_runtime_failure_flushes_log_and_wraps(tmp_path, monkeypatch):
    def boom(self, day):
        raise RuntimeError("timetable exploded")

    monkeypatch.setattr(simcore.Simulation, "_timetable", boom)
    with pytest.raises(SimulationError, match="exploded"):
        run_doc(small_doc(), tmp_path)
    seeds = read_events(tmp_path / "events.jsonl")
    assert len(seeds) == 4 and all(e["source"] == "seed" for e in seeds)


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert main(["simulate", "no_such_scenario", "-o", str(tmp_path)]) == 2
    p = tmp_path / "s.yaml"
    p.write_text(json.dumps(small_doc(days=1)))
    monkeypatch.setattr(simcore.Simulation, "_timetable", lambda self, day: 1 / 0)
    assert main(["simulate", str(p), "-o", str(tmp_path / "o")]) == 3


def test_synth_gps_cadence_and_clusters():
    points, people, _ = synth_gps(DEFAULT_PROFILES[:1], per_profile=1, n_days=2, seed=0)
    ts = [p.timestamp for p in points]
    gaps = {(b - a).total_seconds() for a, b in zip(ts, ts[1:])}
    assert gaps == {300.0}
    assert len(points) == 2 * 288
    xy = project([p.lat for p in points], [p.lon for p in points], ORIGIN)
    labels = dbscan(xy, 5.0, 10)
    assert len(set(labels.tolist()) - {-1}) >= 2
