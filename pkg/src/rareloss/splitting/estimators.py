"""Fixed-factor and fixed-effort dynamic splitting estimators of P(S(X(1)) > gamma)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError, ExplosionError
from ..report import EstimateReport
from ..rng import RngStream, as_generator
from .embedding import EmbeddingPlan
from .schedule import LevelSchedule

DEFAULT_MAX_PATHS = 1_000_000


@dataclass(frozen=True)
class SplittingRun:
    """One estimator call: the estimate W and the survivor count per level."""

    estimate: float
    counts: tuple[int, ...]


def _increments(times):
    prev = 0.0
    for t in times:
        yield t - prev
        prev = t


def fixed_factor_run(plan: EmbeddingPlan, gamma: float, sched: LevelSchedule, rng=None,
                     max_paths: int = DEFAULT_MAX_PATHS) -> SplittingRun:
    """Single root; every survivor of level i-1 spawns s independent extensions.

    W = |X_L| / s^(L-1), or 0 as soon as a level is empty.
    """
    if sched.policy != "fixed_factor":
        raise ConfigError("fixed_factor_run needs a fixed_factor schedule")
    gen = as_generator(rng)
    s = sched.s
    states = np.zeros((1, plan.D))
    counts = []
    for i, dt in enumerate(_increments(sched.times)):
        if i > 0:
            if states.shape[0] * s > max_paths:
                raise ExplosionError(f"level {i + 1} would hold {states.shape[0] * s} paths (limit {max_paths})")
            states = np.repeat(states, s, axis=0)
        states = states + gen.standard_gamma(dt, size=states.shape)
        states = states[plan.loss(states) > gamma]
        counts.append(states.shape[0])
        if states.shape[0] == 0:
            return SplittingRun(0.0, tuple(counts) + (0,) * (sched.L - len(counts)))
    return SplittingRun(counts[-1] / float(s) ** (sched.L - 1), tuple(counts))


def fixed_factor_estimate(plan: EmbeddingPlan, gamma: float, sched: LevelSchedule, rng=None,
                          max_paths: int = DEFAULT_MAX_PATHS) -> float:
    return fixed_factor_run(plan, gamma, sched, rng, max_paths).estimate


def fixed_effort_run(plan: EmbeddingPlan, gamma: float, sched: LevelSchedule, rng=None) -> SplittingRun:
    """s fresh roots at level 1, then s extensions of survivors drawn uniformly
    with replacement at each later level.  W = prod_i |X_i| / s."""
    if sched.policy != "fixed_effort":
        raise ConfigError("fixed_effort_run needs a fixed_effort schedule")
    gen = as_generator(rng)
    s = sched.s
    survivors = np.zeros((s, plan.D))
    counts = []
    log_w = 0.0
    for i, dt in enumerate(_increments(sched.times)):
        if i == 0:
            states = survivors
        else:
            states = survivors[gen.integers(0, survivors.shape[0], size=s)]
        states = states + gen.standard_gamma(dt, size=states.shape)
        survivors = states[plan.loss(states) > gamma]
        k = survivors.shape[0]
        counts.append(k)
        if k == 0:
            return SplittingRun(0.0, tuple(counts) + (0,) * (sched.L - len(counts)))
        log_w += math.log(k / s)
    return SplittingRun(math.exp(log_w), tuple(counts))


def fixed_effort_estimate(plan: EmbeddingPlan, gamma: float, sched: LevelSchedule, rng=None) -> float:
    return fixed_effort_run(plan, gamma, sched, rng).estimate


def ds_estimate(plan: EmbeddingPlan, gamma: float, sched: LevelSchedule, runs: int = 10, seed: int = 0,
                calls_per_run: int = 1, max_paths: int = DEFAULT_MAX_PATHS) -> EstimateReport:
    """R independent runs; each run averages ``calls_per_run`` estimator calls.

    Effort per run is reported as s L loss evaluations for fixed effort and
    as the number of single-root calls for fixed factor.
    """
    if runs < 1 or calls_per_run < 1:
        raise DomainError("runs and calls_per_run must be positive")
    t0 = time.perf_counter()
    per_run = []
    for r in range(runs):
        stream = RngStream(seed).replication(r)
        vals = []
        for j in range(calls_per_run):
            sub = stream.substream(j) if calls_per_run > 1 else stream
            if sched.policy == "fixed_effort":
                vals.append(fixed_effort_estimate(plan, gamma, sched, sub))
            else:
                vals.append(fixed_factor_estimate(plan, gamma, sched, sub, max_paths))
        per_run.append(float(np.mean(vals)))
    elapsed = 1000.0 * (time.perf_counter() - t0)
    if sched.policy == "fixed_effort":
        n_per_run, method = sched.s * sched.L * calls_per_run, "ds-fe"
    else:
        n_per_run, method = calls_per_run, "ds-ff"
    return EstimateReport.from_runs(per_run, n_per_run, seed, elapsed, model=plan.model.name,
                                    method=method, gamma=float(gamma),
                                    extra={"s": sched.s, "L": sched.L})
