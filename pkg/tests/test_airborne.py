import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from episim.airborne import (
    AgentImmunity,
    ClassQuarantine,
    ConfigError,
    TestingPolicy as PcrPolicy,
    VaccinationEvent,
    contact_pairs,
    detect_contacts,
    infection_prob,
    infection_probs,
    pcr_test,
    trace_contacts,
    transmit,
    vaccinate,
)

from oracles import brute_pairs


def test_contact_radius_examples():
    near = detect_contacts([7, 8], [[0, 0], [0.5, 0]], [True, False], [False, True], place=3, time=9)
    assert len(near) == 1
    c = near[0]
    assert (c.transmitter, c.receiver, c.place, c.time) == (7, 8, 3, 9)
    assert c.distance_m == pytest.approx(0.5)
    assert detect_contacts([7, 8], [[0, 0], [1.5, 0]], [True, False], [False, True]) == []


def test_contact_at_exact_radius_counts():
    assert len(detect_contacts([0, 1], [[0, 0], [1.0, 0]], [True, False], [False, True])) == 1


def test_both_directions_when_both_flags_set():
    got = detect_contacts([0, 1], [[0, 0], [0.2, 0]], [True, True], [True, True])
    assert {(c.transmitter, c.receiver) for c in got} == {(0, 1), (1, 0)}


@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.integers(1, 4))
def test_contact_pairs_match_brute_force(seed, n, n_places):
    rng = np.random.default_rng(seed)
    places = rng.integers(n_places, size=n)
    xy = rng.uniform(0, 3, size=(n, 2))
    idx = np.arange(n)
    trans = idx[rng.random(n) < 0.4]
    recv = idx[rng.random(n) < 0.6]
    t, r, d = contact_pairs(places, xy, trans, recv)
    want = brute_pairs(places, xy, trans, recv, 1.0)
    assert sorted(zip(t.tolist(), r.tolist())) == sorted((a, b) for a, b, _ in want)
    assert np.all(np.diff(r) >= 0)


def test_infection_prob_examples():
    assert infection_prob(AgentImmunity(0.5, k=0.3)) == pytest.approx(0.15)
    assert infection_prob(AgentImmunity(1.0, alpha_vacc=1.0, gamma_vacc=1.0, k=0.3)) == 0.0
    assert infection_prob(AgentImmunity(1.0, 0.8, 0.2, 0.0, 0.0, k=0.3)) == pytest.approx(0.3)
    v = infection_probs([1.0, 0.5], 0.3, 0.8, [0.0, 0.5], 0.2, [0.0, 0.0])
    assert v == pytest.approx([0.3, 0.5 * 0.3 * 0.6])


def test_immunity_rejects_overflowing_weights():
    with pytest.raises(ValueError):
        AgentImmunity(1.0, alpha_vacc=0.8, alpha_hyg=0.5, gamma_vacc=1.0, gamma_hyg=1.0)
    with pytest.raises(ValueError):
        AgentImmunity(1.2)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_transmission_monotone_in_rho(seed, a, b):
    lo, hi = sorted((a, b))
    rng = np.random.default_rng(seed)
    n = 40
    t = rng.integers(n, size=80)
    r = rng.integers(n, size=80)
    o = np.lexsort((t, r))
    t, r = t[o], r[o]
    u_inf, u_pick = rng.random(n), rng.random(n)
    got_lo = {x for x, _ in transmit(t, r, np.full(n, lo), u_inf, u_pick)}
    got_hi = {x for x, _ in transmit(t, r, np.full(n, hi), u_inf, u_pick)}
    assert got_lo <= got_hi


def test_transmit_rate_matches_multiple_contacts():
    rng = np.random.default_rng(0)
    n = 20000
    r = np.repeat(np.arange(n), 3)
    t = np.tile([n, n + 1, n + 2], n)
    rho = np.full(n + 3, 0.2)
    hits = transmit(t, r, rho, rng.random(n + 3), rng.random(n + 3))
    assert len(hits) / n == pytest.approx(1 - 0.8**3, abs=0.01)
    picks = np.bincount([s - n for _, s in hits], minlength=3) / len(hits)
    assert picks == pytest.approx([1 / 3] * 3, abs=0.02)


def test_zero_rho_never_infects():
    assert transmit(np.array([0]), np.array([1]), np.zeros(2), np.zeros(2), np.zeros(2)) == []


def test_pcr_test_sensitivity_specificity():
    pol = PcrPolicy(sensitivity=0.9, specificity=0.95)
    u = np.array([0.5, 0.95, 0.5, 0.97])
    assert pcr_test([True, True, False, False], u, pol).tolist() == [True, False, False, True]


def test_trace_contacts_both_directions():
    hist = [(np.array([1, 4]), np.array([2, 5])), (np.array([6]), np.array([1]))]
    assert trace_contacts(hist, [1]).tolist() == [2, 6]
    assert trace_contacts([], [1]).size == 0


def test_vaccinate():
    g = np.array([0.0, 0.9, 0.2])
    out = vaccinate(g, np.array([0, 1]), 0.8)
    assert out.tolist() == pytest.approx([0.8, 1.0, 0.2])
    assert g.tolist() == [0.0, 0.9, 0.2]
    assert vaccinate(np.array([0.9]), np.array([0]), 0.5)[0] == 1.0


def test_policy_validation():
    with pytest.raises(ConfigError):
        PcrPolicy(target="nobody")
    with pytest.raises(ConfigError):
        PcrPolicy(sensitivity=1.5)
    with pytest.raises(ConfigError):
        VaccinationEvent(boost=0.5)
    with pytest.raises(ConfigError):
        VaccinationEvent(boost=0.0, day=1)
    with pytest.raises(ConfigError):
        ClassQuarantine(("student",), days=0, day=1)
    assert PcrPolicy(start_day=3, cadence_days=2).due(5)
    assert not PcrPolicy(start_day=3, cadence_days=2).due(4)
