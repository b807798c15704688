"""Fixed-factor splitting in the ideal case: every level survives with probability 1/s."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..numerics import find_root
from ..rng import as_generator


def ideal_case_stats(s: int, L: int) -> tuple[float, float, float]:
    """Mean, variance and work-normalized variance (log l / log s)^2 (s - 1)
    of W = |X_L| / s^(L-1) when each level has conditional survival 1/s."""
    if s < 2 or L < 1:
        raise DomainError("need s >= 2 and L >= 1")
    k = L - 1
    mean = float(s) ** (-k)
    var = k * (1.0 - 1.0 / s) * float(s) ** (-2 * k)
    wtvp = float(k * k * (s - 1))
    return mean, var, wtvp


def optimal_splitting_factor() -> float:
    """Minimizer over s > 1 of (s - 1) / (log s)^2, i.e. the root of log s = 2 (s - 1) / s."""
    return find_root(lambda s: math.log(s) - 2.0 * (s - 1.0) / s, 2.0, 10.0, tol=1e-14)


def simulate_ideal_branching(s: int, L: int, n_rep: int, rng=None) -> np.ndarray:
    """n_rep draws of W: one root, then N_{i+1} ~ Bin(s N_i, 1/s) for L - 1 levels."""
    if s < 2 or L < 1 or n_rep < 1:
        raise DomainError("need s >= 2, L >= 1, n_rep >= 1")
    gen = as_generator(rng)
    N = np.ones(n_rep, dtype=np.int64)
    for _ in range(L - 1):
        N = gen.binomial(s * N, 1.0 / s)
    return N / float(s) ** (L - 1)
