"""Gamma subordinator paths and gamma-bridge interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..rng import as_generator


@dataclass(frozen=True, eq=False)
class SubordinatorState:
    """Time ``t`` and the component values Lambda(t) (shape (D,) or (n, D))."""

    t: float
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if not 0.0 <= self.t <= 1.0 + 1e-12:
            raise DomainError(f"time {self.t} outside [0, 1]")
        if np.any(lam < 0) or np.any(np.isnan(lam)):
            raise DomainError("subordinator values must be nonnegative")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def origin(cls, D: int, n: int | None = None) -> "SubordinatorState":
        return cls(0.0, np.zeros(D if n is None else (n, D)))


def gamma_increments(dt: float, shape, gen) -> np.ndarray:
    if not dt > 0:
        raise DomainError("time increment must be positive")
    return gen.standard_gamma(dt, size=shape)


def subordinator_step(state: SubordinatorState, dt: float, rng=None) -> SubordinatorState:
    """Advance every component by an independent G(dt, 1) increment."""
    gen = as_generator(rng)
    inc = gamma_increments(dt, state.lam.shape, gen)
    t = state.t + dt
    if abs(t - 1.0) <= 1e-12:
        t = 1.0
    return SubordinatorState(t, state.lam + inc)


def simulate_at_times(D: int, times, n: int = 1, rng=None) -> np.ndarray:
    """Lambda at the given increasing times for n independent paths: shape (len(times), n, D)."""
    gen = as_generator(rng)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise DomainError("times must be positive and strictly increasing")
    out = np.empty((times.size, n, D))
    lam = np.zeros((n, D))
    prev = 0.0
    for i, t in enumerate(times):
        lam = lam + gen.standard_gamma(t - prev, size=(n, D))
        out[i] = lam
        prev = t
    return out


def gamma_bridge(lam_l, lam_u, t_l: float, t_u: float, t: float, rng=None) -> np.ndarray:
    """Lambda(t) given Lambda(t_l) and Lambda(t_u): lam_l + (lam_u - lam_l) B,
    B ~ Beta(t - t_l, t_u - t) independently per component."""
    if not t_l < t < t_u:
        raise DomainError(f"need t_l < t < t_u, got {t_l}, {t}, {t_u}")
    lam_l = np.asarray(lam_l, dtype=float)
    lam_u = np.asarray(lam_u, dtype=float)
    if lam_l.shape != lam_u.shape:
        raise DomainError("bridge endpoints must have the same shape")
    span = lam_u - lam_l
    if np.any(span < 0):
        raise DomainError("bridge endpoints must satisfy lam_l <= lam_u componentwise")
    gen = as_generator(rng)
    B = gen.beta(t - t_l, t_u - t, size=lam_l.shape)
    return np.clip(lam_l + span * B, lam_l, lam_u)
