import math

import numpy as np
import pytest

from episim.progression import (
    ConfigError,
    DiseaseState,
    HospitalPolicy,
    Progression,
    builtin_table,
    days_to_minutes,
    hospitalize_check,
    parse_table,
    sample_transition,
    step_progression,
)

DS = DiseaseState


def simple_table(median=5.0, sigma=0.5, to_dead=0.0):
    return parse_table({
        "disease": "toy",
        "transitions": {
            "E": [{"to": "I_mild", "p": 1.0, "median": median, "sigma": sigma}],
            "I_mild": [{"to": "R", "p": 1.0 - to_dead, "median": 3.0, "sigma": 0.2},
                       {"to": "D", "p": to_dead, "median": 3.0, "sigma": 0.2}],
        },
    })


def test_absorbing_states_never_sample():
    t = simple_table()
    for s in (DS.R, DS.D):
        with pytest.raises(ValueError):
            sample_transition(s, 30, t, np.random.default_rng(0))


def test_degenerate_branch():
    t = simple_table()
    rng = np.random.default_rng(0)
    assert all(sample_transition(DS.E, 30, t, rng)[0] == DS.I_MILD for _ in range(100))


def test_lognormal_median_monte_carlo():
    t = simple_table(5.0, 0.5)
    rng = np.random.default_rng(11)
    d = [sample_transition(DS.E, 30, t, rng)[1] for _ in range(10000)]
    assert 4.7 <= np.median(d) <= 5.3


def test_days_to_minutes():
    assert days_to_minutes(1.0) == 1440
    assert days_to_minutes(1e-6) == 1
    assert days_to_minutes(0.5001 / 1440) == 1


def test_step_progression_waits_until_due():
    p = Progression(simple_table(), [30.0], seed=1)
    p.enter(0, DS.E, 0)
    due = int(p.exit_at[0])
    assert step_progression(p, 0, due - 1) is None
    ev = step_progression(p, 0, due)
    assert ev.old == DS.E and ev.new == DS.I_MILD and ev.minute == due


def test_progression_stream_per_agent_is_independent_of_others():
    a = Progression(simple_table(), [30.0, 40.0], seed=3)
    b = Progression(simple_table(), [30.0, 40.0], seed=3)
    a.enter(0, DS.E, 0)
    b.enter(1, DS.E, 0)
    b.enter(0, DS.E, 0)
    assert a.exit_at[0] == b.exit_at[0]


def test_no_deaths_without_dead_branches():
    t = simple_table(to_dead=0.0)
    p = Progression(t, np.full(300, 50.0), seed=2)
    for a in range(300):
        p.enter(a, DS.E, 0)
    events = p.step(10**9)
    assert not any(e.new == DS.D for e in events)
    assert np.all(p.state == int(DS.R))


def test_transitions_stay_on_edges():
    t = builtin_table("covid")
    edges = t.edges()
    p = Progression(t, np.linspace(1, 89, 500), seed=4)
    for a in range(500):
        p.enter(a, DS.E, 0)
    for e in p.step(10**9):
        assert (e.old, e.new) in edges
    assert np.isin(p.state, [int(DS.R), int(DS.D)]).all()


def test_dengue_branches_only_mild_or_severe():
    t = builtin_table("dengue")
    assert {b.to for b in t.transitions[DS.E]} == {DS.I_MILD, DS.I_SEV}
    states = {s for edge in t.edges() for s in edge}
    assert DS.I_ASYM not in states and DS.I_CRIT not in states


def test_table_validation_errors():
    with pytest.raises(ConfigError):
        parse_table({"transitions": {"E": [{"to": "R", "p": 0.5, "median": 1, "sigma": 0.1}]}})
    with pytest.raises(ConfigError):
        parse_table({"transitions": {"E": [{"to": "I_mild", "p": 1.0, "median": 1, "sigma": 0.1}]}})
    with pytest.raises(ConfigError):
        parse_table({"transitions": {"E": [{"to": "S", "p": 1.0, "median": 1, "sigma": 0.1}]}})
    with pytest.raises(ConfigError):
        parse_table({"transitions": {"E": [{"to": "R", "p": 1.0, "median": 1, "sigma": 0.0}]}})


def test_hospitalize_check():
    pol = HospitalPolicy(p_mild=0.0, p_severe=1.0)
    assert not hospitalize_check(DS.I_ASYM, pol, 0.0)
    assert hospitalize_check(DS.I_SEV, pol, 0.999)
    assert not hospitalize_check(DS.I_MILD, pol, 0.0)


def test_counts_include_hospital_flag():
    p = Progression(simple_table(), [30.0, 30.0, 30.0], seed=0)
    p.enter(1, DS.E, 0)
    p.enter(2, DS.E, 0)
    c = p.counts(np.array([False, False, True]))
    assert c.sum() == 3 and c[DS.S] == 1 and c[DS.E] == 1 and c[DS.HOSP] == 1
