"""Adaptive level selection by time bisection on gamma bridges."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, ScheduleError
from ..rng import as_generator
from .embedding import EmbeddingPlan
from .schedule import LevelSchedule
from .subordinator import gamma_bridge


def adaptive_levels(plan: EmbeddingPlan, gamma: float, s: int = 1000, rho: float = 0.5, eps_t: float = 1e-3,
                    eps_p: float = 0.05, rng=None, *, max_levels: int = 200, max_bisections: int = 60,
                    policy: str = "fixed_effort") -> LevelSchedule:
    """Level times at which about a fraction ``rho`` of the current paths survive.

    A population of s paths carries its state at the last accepted time and
    a forward endpoint at t = 1.  The next time is found by bisection: each
    candidate is filled in by a gamma bridge and accepted when the surviving
    fraction is within ``eps_p`` of ``rho``.  When the fraction at t = 1 is
    already at least rho - eps_p, or the bisection closes within ``eps_t``
    of 1, the schedule ends at 1.  Survivors are resampled with replacement
    and given fresh forward endpoints.
    """
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie in (0, 1)")
    if not (eps_t > 0 and eps_p > 0):
        raise DomainError("tolerances must be positive")
    if s < 2:
        raise DomainError("population size must be at least 2")
    gen = as_generator(rng)
    t_l = 0.0
    lam_l = np.zeros((s, plan.D))
    lam_u = lam_l + gen.standard_gamma(1.0, size=lam_l.shape)
    times: list[float] = []
    for _ in range(max_levels):
        frac_end = np.mean(plan.loss(lam_u) > gamma)
        if frac_end >= rho - eps_p:
            times.append(1.0)
            return LevelSchedule(tuple(times), policy, s)
        lo, hi = t_l, 1.0
        chosen = None
        for _ in range(max_bisections):
            mid = 0.5 * (lo + hi)
            lam_mid = gamma_bridge(lam_l, lam_u, t_l, 1.0, mid, gen)
            alive = plan.loss(lam_mid) > gamma
            frac = alive.mean()
            if abs(frac - rho) <= eps_p:
                chosen = (mid, lam_mid, alive)
                break
            if 1.0 - mid <= eps_t:
                break
            if frac > rho:
                lo = mid
            else:
                hi = mid
            if hi - lo <= eps_t and 1.0 - hi > eps_t and alive.any():
                # survival drops steeply inside an eps_t window: accept the point
                chosen = (mid, lam_mid, alive)
                break
        if chosen is None:
            if 1.0 - hi <= eps_t or 1.0 - mid <= eps_t:
                times.append(1.0)
                return LevelSchedule(tuple(times), policy, s)
            raise ScheduleError(f"bisection after t={t_l} did not reach a survival fraction near {rho}")
        t_new, lam_new, alive = chosen
        if not alive.any():
            raise ScheduleError(f"no path survives at t={t_new}")
        times.append(float(t_new))
        idx = np.flatnonzero(alive)[gen.integers(0, alive.sum(), size=s)]
        lam_l = lam_new[idx]
        lam_u = lam_l + gen.standard_gamma(1.0 - t_new, size=lam_l.shape)
        t_l = t_new
    raise ScheduleError(f"no schedule within {max_levels} levels")
