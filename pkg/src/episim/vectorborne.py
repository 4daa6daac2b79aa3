"""Patch-level vector SEI dynamics and the human force of infection.

Rates are per day. Each patch carries real-valued susceptible, exposed and
infectious vector counts integrated with forward Euler at the disease step
(5 minutes by default).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .environment import ConfigError

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
DEFAULT_STEP_DAYS = 5.0 / MINUTES_PER_DAY

# (upper temperature bound, incubation days low, high); the last band also
# covers temperatures above its bound
INCUBATION_BANDS = ((21.0, 10.0, 25.0), (26.0, 7.0, 10.0), (31.0, 4.0, 7.0))


@dataclass(frozen=True)
class VectorParams:
    psi_v: float = 0.3
    mu_v: float = 1.0 / 14.0
    sigma_v: float = 0.5
    sigma_h: float = 10.0
    beta_vh: float = 0.33
    beta_hv: float = 0.33
    K_v: tuple[float, float] = (100.0, 200.0)

    def __post_init__(self):
        for name in ("psi_v", "mu_v", "sigma_v", "sigma_h"):
            if getattr(self, name) < 0:
                raise ConfigError(f"vector.{name}: must be non-negative")
        for name in ("beta_vh", "beta_hv"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"vector.{name}: must lie in [0, 1]")
        if self.psi_v <= self.mu_v:
            logger.warning("psi_v <= mu_v: vector populations decline to zero")


def vector_birth(N_v, K_v, p: VectorParams):
    """Logistic emergence ``N (psi - (psi - mu) N / K)``."""
    N_v = np.asarray(N_v, dtype=float)
    return N_v * (p.psi_v - (p.psi_v - p.mu_v) * N_v / K_v)


def total_bites(N_v, N_h, p: VectorParams):
    """Total bites b, bites per vector b_v, and bites per human b_h (per day).

    Empty patches (no vectors and no humans) give zero; per-capita rates
    are zero where their denominator is zero.
    """
    N_v = np.asarray(N_v, dtype=float)
    N_h = np.asarray(N_h, dtype=float)
    sv, sh = p.sigma_v * N_v, p.sigma_h * N_h
    den = sv + sh
    with np.errstate(invalid="ignore", divide="ignore"):
        b = np.where(den > 0, sv * sh / np.where(den > 0, den, 1.0), 0.0)
        b_v = np.where(N_v > 0, b / np.where(N_v > 0, N_v, 1.0), 0.0)
        b_h = np.where(N_h > 0, b / np.where(N_h > 0, N_h, 1.0), 0.0)
    if b.ndim == 0:
        return float(b), float(b_v), float(b_h)
    return b, b_v, b_h


def vector_force(b_v, I_h, N_h, p: VectorParams):
    """Force of infection on vectors, ``b_v * beta_vh * I_h / N_h``."""
    I_h = np.asarray(I_h, dtype=float)
    N_h = np.asarray(N_h, dtype=float)
    frac = np.divide(I_h, N_h, out=np.zeros(np.broadcast(I_h, N_h).shape), where=N_h > 0)
    out = np.asarray(b_v) * p.beta_vh * frac
    return float(out) if out.ndim == 0 else out


def human_force(b_h, I_v, N_v, p: VectorParams):
    """Force of infection on humans, ``b_h * beta_hv * I_v / N_v``."""
    I_v = np.asarray(I_v, dtype=float)
    N_v = np.asarray(N_v, dtype=float)
    frac = np.divide(I_v, N_v, out=np.zeros(np.broadcast(I_v, N_v).shape), where=N_v > 0)
    out = np.asarray(b_h) * p.beta_hv * frac
    return float(out) if out.ndim == 0 else out


def infection_probability(lam, dt):
    """Chance of at least one event of an exponential clock with rate ``lam`` in ``dt``."""
    return -np.expm1(-np.asarray(lam, dtype=float) * dt) if np.ndim(lam) else -math.expm1(-lam * dt)


def incubation_band(T: float) -> tuple[float, float, bool]:
    """(low, high, extrapolated) incubation days for temperature ``T``."""
    for upper, lo, hi in INCUBATION_BANDS:
        if T < upper:
            return lo, hi, False
    _, lo, hi = INCUBATION_BANDS[-1]
    return lo, hi, True


def incubation_rate(T: float, u: float) -> float:
    """Exposed-to-infectious vector rate ``1 / tinc`` with ``tinc = U(lo, hi)``.

    ``u`` is the uniform variate; sharing it between two temperatures keeps
    the hotter patch's incubation no longer than the cooler one's.
    """
    lo, hi, extrapolated = incubation_band(T)
    if extrapolated:
        logger.warning("temperature %.1f C is above the last incubation band; using U(%g, %g)", T, lo, hi)
    return 1.0 / (lo + (hi - lo) * u)


@dataclass(frozen=True)
class PatchState:
    S_v: float
    E_v: float
    I_v: float
    K_v: float
    nu_v: float = 0.0
    lambda_v: float = 0.0
    T: float = 27.0

    @property
    def N_v(self) -> float:
        return self.S_v + self.E_v + self.I_v


def derivatives(S, E, I, K, nu, lam_v, p: VectorParams):
    N = S + E + I
    h = vector_birth(N, K, p)
    dS = h - lam_v * S - p.mu_v * S
    dE = lam_v * S - nu * E - p.mu_v * E
    dI = nu * E - p.mu_v * I
    return dS, dE, dI


def _clamp(S, E, I):
    neg = (np.asarray(S) < 0) | (np.asarray(E) < 0) | (np.asarray(I) < 0)
    if np.any(neg):
        logger.warning("negative vector count clamped to zero in %d patch(es)", int(np.sum(neg)))
        S, E, I = np.maximum(S, 0.0), np.maximum(E, 0.0), np.maximum(I, 0.0)
    return S, E, I


def step_patch(state: PatchState, p: VectorParams, dt: float = DEFAULT_STEP_DAYS) -> PatchState:
    """One forward-Euler step of length ``dt`` days."""
    dS, dE, dI = derivatives(state.S_v, state.E_v, state.I_v, state.K_v, state.nu_v, state.lambda_v, p)
    S, E, I = _clamp(state.S_v + dt * dS, state.E_v + dt * dE, state.I_v + dt * dI)
    return replace(state, S_v=float(S), E_v=float(E), I_v=float(I))


class PatchArrays:
    """All patches of an environment as parallel arrays."""

    def __init__(self, K_v, temperature, p: VectorParams, S_v=None, E_v=None, I_v=None):
        self.p = p
        self.K = np.asarray(K_v, dtype=float)
        n = len(self.K)
        self.T = np.broadcast_to(np.asarray(temperature, dtype=float), (n,)).copy()
        self.S = self.K.copy() if S_v is None else np.asarray(S_v, dtype=float).copy()
        self.E = np.zeros(n) if E_v is None else np.asarray(E_v, dtype=float).copy()
        self.I = np.zeros(n) if I_v is None else np.asarray(I_v, dtype=float).copy()
        self.nu = np.zeros(n)

    def __len__(self):
        return len(self.K)

    @property
    def N(self) -> np.ndarray:
        return self.S + self.E + self.I

    def draw_incubation(self, u: np.ndarray) -> None:
        lo = np.empty(len(self))
        hi = np.empty(len(self))
        done = np.zeros(len(self), dtype=bool)
        for upper, a, b in INCUBATION_BANDS:
            sel = ~done & (self.T < upper)
            lo[sel], hi[sel] = a, b
            done |= sel
        if np.any(~done):
            logger.warning("%d patch(es) above the last incubation band; holding U(%g, %g)",
                           int(np.sum(~done)), *INCUBATION_BANDS[-1][1:])
            lo[~done], hi[~done] = INCUBATION_BANDS[-1][1:]
        self.nu = 1.0 / (lo + (hi - lo) * np.asarray(u, dtype=float))

    def forces(self, N_h: np.ndarray, I_h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(lambda_v, lambda_h) per patch from the current state and human snapshot."""
        N = self.N
        _, b_v, b_h = total_bites(N, N_h, self.p)
        return vector_force(b_v, I_h, N_h, self.p), human_force(b_h, self.I, N, self.p)

    def step(self, lam_v: np.ndarray, dt: float = DEFAULT_STEP_DAYS) -> None:
        dS, dE, dI = derivatives(self.S, self.E, self.I, self.K, self.nu, lam_v, self.p)
        self.S, self.E, self.I = _clamp(self.S + dt * dS, self.E + dt * dE, self.I + dt * dI)


@dataclass(frozen=True)
class VectorControlPolicy:
    n_days: int = 7
    threshold: int = 2  # exposures in a zone over the window must exceed this
    m_pct: float = 75.0

    def __post_init__(self):
        if self.n_days < 1:
            raise ConfigError("vector_control.n_days: must be >= 1")
        if not 0.0 <= self.m_pct <= 100.0:
            raise ConfigError("vector_control.m_pct: must lie in [0, 100]")


def vector_control(patches: PatchArrays, zone_patches: np.ndarray, weekly_exposed: int,
                   policy: VectorControlPolicy) -> bool:
    """Scale the zone's vector counts by ``1 - m/100`` when exposures exceed the threshold."""
    if weekly_exposed <= policy.threshold:
        return False
    f = 1.0 - policy.m_pct / 100.0
    patches.S[zone_patches] *= f
    patches.E[zone_patches] *= f
    patches.I[zone_patches] *= f
    return True
