import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from episim.vectorborne import (
    DEFAULT_STEP_DAYS,
    ConfigError,
    PatchArrays,
    PatchState,
    VectorControlPolicy,
    VectorParams,
    human_force,
    incubation_band,
    incubation_rate,
    infection_probability,
    step_patch,
    total_bites,
    vector_birth,
    vector_control,
    vector_force,
)

from oracles import logistic_closed_form, rk4_logistic_patch

P = VectorParams()


def test_birth_matches_exact_rational():
    psi, mu = Fraction(3, 10), Fraction(1, 14)
    for N, K in ((50, 100), (100, 200), (150, 100), (0, 100)):
        want = N * (psi - (psi - mu) * Fraction(N, K))
        assert vector_birth(N, K, P) == pytest.approx(float(want), rel=1e-14)
    assert float(Fraction(75) * (psi - (psi - mu) * Fraction(75, 150))) == pytest.approx(975 / 70)
    assert vector_birth(75, 150, P) == pytest.approx(975 / 70, rel=1e-14)


def test_birth_balances_death_at_capacity():
    assert vector_birth(120.0, 120.0, P) == pytest.approx(P.mu_v * 120.0)


def test_bites_examples():
    b, b_v, b_h = total_bites(100, 10, P)
    assert b == pytest.approx(100 / 3)
    assert b_v == pytest.approx(1 / 3) and b_h == pytest.approx(10 / 3)
    b, _, _ = total_bites(100, 5, P)
    assert b == pytest.approx(25.0)
    assert total_bites(0, 0, P) == (0.0, 0.0, 0.0)
    assert total_bites(50, 0, P) == (0.0, 0.0, 0.0)


def test_force_examples():
    assert vector_force(0.333, 2, 10, P) == pytest.approx(0.333 * 0.33 * 0.2)
    assert vector_force(0.333, 0, 0, P) == 0.0
    assert human_force(1.0, 10, 100, P) == pytest.approx(0.033)
    assert human_force(1.0, 0, 0, P) == 0.0


def test_infection_probability():
    assert infection_probability(math.log(2), 1.0) == pytest.approx(0.5)
    assert infection_probability(0.005, 1.0) == pytest.approx(1 - math.exp(-0.005))
    assert infection_probability(0.005, 1.0) == pytest.approx(0.0049875, abs=1e-7)
    assert infection_probability(np.array([0.0, 1e-12]), 1.0)[1] == pytest.approx(1e-12)


def test_incubation_bands(caplog):
    assert incubation_band(18) == (10.0, 25.0, False)
    assert incubation_band(21) == (7.0, 10.0, False)
    assert incubation_band(27) == (4.0, 7.0, False)
    with caplog.at_level(logging.WARNING):
        assert incubation_rate(33, 0.0) == pytest.approx(1 / 4)
    assert "above the last incubation band" in caplog.text
    assert incubation_rate(27, 1.0) == pytest.approx(1 / 7)


@given(st.floats(0, 1), st.floats(10, 35), st.floats(10, 35))
def test_hotter_patch_incubates_no_slower(u, a, b):
    lo, hi = sorted((a, b))
    assert incubation_rate(hi, u) >= incubation_rate(lo, u)


def test_empty_patch_stays_empty():
    s = PatchState(0.0, 0.0, 0.0, 150.0, nu_v=0.2, lambda_v=0.5)
    for _ in range(100):
        s = step_patch(s, P)
    assert (s.S_v, s.E_v, s.I_v) == (0.0, 0.0, 0.0)


def test_one_step_total_change():
    s = PatchState(80.0, 10.0, 5.0, 150.0, nu_v=0.2, lambda_v=0.4)
    out = step_patch(s, P)
    N = s.N_v
    assert out.N_v - N == pytest.approx((vector_birth(N, 150.0, P) - P.mu_v * N) * DEFAULT_STEP_DAYS, rel=1e-12)


@given(st.floats(0, 300), st.floats(0, 50), st.floats(0, 50), st.floats(1, 300),
       st.floats(0, 10), st.floats(0, 1))
def test_step_stays_non_negative(S, E, I, K, lam, nu):
    s = PatchState(S, E, I, K, nu_v=nu, lambda_v=lam)
    for _ in range(50):
        s = step_patch(s, P)
        assert min(s.S_v, s.E_v, s.I_v) >= 0.0


def test_disease_free_patch_against_rk4_and_closed_form():
    arr = PatchArrays([150.0], 27.0, P, S_v=[20.0])
    days = 30
    for _ in range(int(round(days / DEFAULT_STEP_DAYS))):
        arr.step(np.zeros(1))
    exact = logistic_closed_form(20.0, 150.0, P.psi_v, P.mu_v, days)
    assert arr.S[0] == pytest.approx(exact, rel=1e-3)
    assert arr.S[0] == pytest.approx(rk4_logistic_patch(20.0, 150.0, P.psi_v, P.mu_v, days, 0.01), rel=1e-3)


def test_control_scales_zone_and_respects_threshold():
    arr = PatchArrays([100.0, 100.0, 100.0], 27.0, P, E_v=[4, 4, 4], I_v=[8, 8, 8])
    pol = VectorControlPolicy(n_days=7, threshold=2, m_pct=75)
    assert not vector_control(arr, np.array([0, 1]), 2, pol)
    assert arr.N.tolist() == [112, 112, 112]
    assert vector_control(arr, np.array([0, 1]), 3, pol)
    assert arr.S.tolist() == [25, 25, 100] and arr.I.tolist() == [2, 2, 8]


def test_full_control_rebounds_only_from_survivors():
    arr = PatchArrays([100.0], 27.0, P)
    vector_control(arr, np.array([0]), 5, VectorControlPolicy(m_pct=100))
    for _ in range(1000):
        arr.step(np.zeros(1))
    assert arr.N[0] == 0.0
    arr = PatchArrays([100.0], 27.0, P)
    vector_control(arr, np.array([0]), 5, VectorControlPolicy(m_pct=75))
    for _ in range(int(10 / DEFAULT_STEP_DAYS)):
        arr.step(np.zeros(1))
    assert arr.N[0] == pytest.approx(logistic_closed_form(25.0, 100.0, P.psi_v, P.mu_v, 10), rel=1e-3)


def test_draw_incubation_per_band():
    arr = PatchArrays([100.0] * 3, [18.0, 24.0, 28.5], P)
    arr.draw_incubation(np.zeros(3))
    assert arr.nu.tolist() == pytest.approx([1 / 10, 1 / 7, 1 / 4])


def test_params_validation(caplog):
    with pytest.raises(ConfigError):
        VectorParams(beta_vh=1.5)
    with pytest.raises(ConfigError):
        VectorParams(sigma_v=-1)
    with pytest.raises(ConfigError):
        VectorControlPolicy(m_pct=120)
    with caplog.at_level(logging.WARNING):
        VectorParams(psi_v=0.05)
    assert "decline" in caplog.text
