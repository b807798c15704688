"""Crude Monte Carlo estimators of tail probability, VaR and CVaR."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError


def _losses(losses) -> np.ndarray:
    arr = np.asarray(losses, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("empty loss sample")
    return arr


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def order_index(alpha: float, n: int) -> int:
    """ceil(alpha n), guarded against float noise such as 0.9 * 100 = 90.00000000000001."""
    return max(1, min(n, math.ceil(round(alpha * n, 9))))


def cmc_tail_prob(losses, gamma: float) -> float:
    """Fraction of losses strictly above ``gamma``."""
    arr = _losses(losses)
    return float(np.count_nonzero(arr > gamma)) / arr.size


def cmc_var(losses, alpha: float) -> float:
    """The ceil(alpha N)-th smallest loss."""
    _check_alpha(alpha)
    arr = _losses(losses)
    k = order_index(alpha, arr.size)
    return float(np.partition(arr, k - 1)[k - 1])


def cmc_cvar(losses, alpha: float, v: float) -> float:
    """sum_k L_k 1{L_k >= v} / (N (1 - alpha)); ties at v are all kept."""
    _check_alpha(alpha)
    arr = _losses(losses)
    return float(arr[arr >= v].sum() / (arr.size * (1.0 - alpha)))


def cmc_var_cvar(losses, alpha: float) -> tuple[float, float]:
    v = cmc_var(losses, alpha)
    return v, cmc_cvar(losses, alpha, v)
