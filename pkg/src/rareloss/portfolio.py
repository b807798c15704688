"""Credit portfolios: exposures, default thresholds and factor loadings."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import DegenerateError, DomainError, ParameterError

_DEGENERATE_B = 1e-12


@dataclass(frozen=True, eq=False)
class Portfolio:
    """d obligors with loss L = c @ B.

    ``loadings`` is d x m (m may be 0); the idiosyncratic weights
    b_k = sqrt(1 - sum_j a_kj^2) are derived, not supplied.
    """

    costs: np.ndarray
    thresholds: np.ndarray
    loadings: np.ndarray
    marginal_pd: np.ndarray | None = None
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=float).ravel()
        x = np.asarray(self.thresholds, dtype=float).ravel()
        d = c.size
        a = np.asarray(self.loadings, dtype=float)
        if a.size == 0:
            a = np.zeros((d, 0))
        if a.ndim != 2 or a.shape[0] != d or x.size != d:
            raise ParameterError("costs, thresholds and loadings must describe the same d obligors")
        if d == 0:
            raise ParameterError("empty portfolio")
        if not np.all(c > 0) or not np.all(np.isfinite(c)):
            raise ParameterError("costs must be positive and finite")
        if np.any(np.isnan(x)):
            raise ParameterError("thresholds must not be NaN")
        resid = 1.0 - np.sum(a * a, axis=1)
        if np.any(resid < -1e-12):
            raise ParameterError("factor loadings must satisfy sum_j a_kj^2 <= 1")
        if np.any(resid <= _DEGENERATE_B**2):
            raise DegenerateError("fully systematic obligor (b_k = 0) is not supported")
        b = np.sqrt(resid)
        pd = None if self.marginal_pd is None else np.asarray(self.marginal_pd, dtype=float).ravel()
        for name, arr in (("costs", c), ("thresholds", x), ("loadings", a), ("b", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if pd is not None:
            pd.setflags(write=False)
        object.__setattr__(self, "marginal_pd", pd)

    @property
    def d(self) -> int:
        return self.costs.size

    @property
    def m(self) -> int:
        return self.loadings.shape[1]

    @property
    def total_exposure(self) -> float:
        return float(self.costs.sum())

    def with_thresholds(self, thresholds) -> "Portfolio":
        return Portfolio(self.costs, thresholds, self.loadings, self.marginal_pd)


def portfolio_loss(p: Portfolio, defaults) -> float | np.ndarray:
    """c @ B for one default vector or a batch of them (rows)."""
    B = np.asarray(defaults)
    if B.shape[-1] != p.d:
        raise DomainError(f"default vector has length {B.shape[-1]}, portfolio has d={p.d}")
    out = B.astype(float) @ p.costs
    return float(out) if np.ndim(out) == 0 else out


def benchmark_loadings(d: int = 1000) -> np.ndarray:
    """The 21-factor block loading matrix: a global column of 0.8, ten
    sector blocks of 0.4 and ten sub-sector blocks of 0.4 repeated in
    every sector."""
    if d % 100 != 0 or d <= 0:
        raise ParameterError("benchmark block structure needs d divisible by 100")
    sector, sub = d // 10, d // 100
    A = np.zeros((d, 21))
    A[:, 0] = 0.8
    for i in range(10):
        A[i * sector:(i + 1) * sector, 1 + i] = 0.4
        for j in range(10):
            lo = i * sector + j * sub
            A[lo:lo + sub, 11 + j] = 0.4
    return A


def benchmark_marginal_pd(d: int = 1000) -> np.ndarray:
    k = np.arange(1, d + 1)
    return 0.01 * (1.0 + np.sin(16.0 * np.pi * k / d))


def benchmark_costs(d: int = 1000) -> np.ndarray:
    k = np.arange(1, d + 1)
    return np.ceil(5.0 * k / d) ** 2


def thresholds_from_pd(pd, variant: str = "gaussian", r: float = 3.0) -> np.ndarray:
    """x_k = F^{-1}(1 - P_k) for the Gaussian or Student-t(r) marginal."""
    pd = np.asarray(pd, dtype=float)
    if np.any((pd <= 0) | (pd >= 1)):
        raise DomainError("marginal default probabilities must lie in (0, 1)")
    if variant == "gaussian":
        return -special.ndtri(pd)
    if variant == "t":
        from .numerics import QuantileFn

        return QuantileFn.student_t(r).isf(pd)
    raise ParameterError(f"thresholds from marginal PDs are defined for gaussian/t, not {variant!r}")


def build_benchmark_portfolio(d: int = 1000, m: int = 21, variant: str = "gaussian", *,
                              r: float = 3.0, clayton_threshold: float = 3.0) -> Portfolio:
    """The d = 1000 test portfolio.

    gaussian/t: c_k = ceil(5k/d)^2, P_k = 0.01 (1 + sin(16 pi k / d)) with
    the 21-factor block loadings.  clayton: unit costs, threshold 3 on
    Exp(1) marginals and no factor loadings.
    """
    if variant == "clayton":
        return Portfolio(np.ones(d), np.full(d, float(clayton_threshold)), np.zeros((d, 0)))
    if m != 21:
        raise ParameterError("the benchmark block structure has exactly m = 21 factors")
    pd = benchmark_marginal_pd(d)
    return Portfolio(benchmark_costs(d), thresholds_from_pd(pd, variant, r), benchmark_loadings(d), pd)


def load_portfolio_csv(path, variant: str = "gaussian", r: float = 3.0) -> Portfolio:
    """Read columns ``k, c_k, x_k`` (or ``p_k``), ``a_1 .. a_m``.

    When only ``p_k`` is present the thresholds are derived for ``variant``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"{path}: no obligor rows")
    cols = rows[0].keys()
    load_cols = sorted((c for c in cols if c.startswith("a_")), key=lambda c: int(c[2:]))
    rows.sort(key=lambda row: int(row["k"]))
    c = np.array([float(row["c_k"]) for row in rows])
    A = np.array([[float(row[col]) for col in load_cols] for row in rows]).reshape(len(rows), len(load_cols))
    pd = np.array([float(row["p_k"]) for row in rows]) if "p_k" in cols else None
    if "x_k" in cols:
        x = np.array([float(row["x_k"]) for row in rows])
    elif pd is not None:
        x = thresholds_from_pd(pd, variant, r)
    else:
        raise ParameterError(f"{path}: need an x_k or p_k column")
    return Portfolio(c, x, A, pd)


def save_portfolio_csv(p: Portfolio, path) -> None:
    header = ["k", "c_k", "x_k"] + (["p_k"] if p.marginal_pd is not None else []) + [f"a_{j + 1}" for j in range(p.m)]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(p.d):
            row = [k + 1, repr(float(p.costs[k])), repr(float(p.thresholds[k]))]
            if p.marginal_pd is not None:
                row.append(repr(float(p.marginal_pd[k])))
            row.extend(repr(float(v)) for v in p.loadings[k])
            w.writerow(row)


def expected_loss(p: Portfolio) -> float:
    if p.marginal_pd is None:
        return math.nan
    return float(p.costs @ p.marginal_pd)
