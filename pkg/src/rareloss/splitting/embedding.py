"""Monotone embedding of the static models into gamma-subordinated processes.

Each scalar source of randomness becomes X(t) = F^{-1}(exp(-Lambda(t)))
(decreasing in t) or F^{-1}(1 - exp(-Lambda(t))) (increasing), with
Lambda(t) ~ G(t, 1).  At t = 1 both give a draw from F.  The sources are
composed so that the portfolio loss is nonincreasing along every path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import DomainError, UnsupportedModelError
from ..models import ClaytonModel, GaussianModel, ModelSpec, TFactorModel, clayton_threshold_psi
from ..numerics import QuantileFn
from ..portfolio import Portfolio
from ..rng import as_generator

DECREASING = "decreasing"
INCREASING = "increasing"


def _as_lam(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(np.isnan(lam)):
        raise DomainError("subordinator values must be nonnegative")
    return lam


def embed_decreasing(lam, F: QuantileFn):
    """F^{-1}(exp(-lam)); lam = 0 maps to the upper support end."""
    lam = _as_lam(lam)
    if F.family == "normal":
        mu, sd = F.params
        # exp(-lam) >= 1/2 iff lam <= ln 2: take the upper-tail route there.
        with np.errstate(divide="ignore"):
            z = np.where(lam > np.log(2.0), special.ndtri(np.exp(-lam)), -special.ndtri(-np.expm1(-lam)))
        out = mu + sd * z
    else:
        u = np.exp(-lam)
        upper = lam <= np.log(2.0)
        out = np.empty(lam.shape)
        out[~upper] = F.ppf(u[~upper])
        out[upper] = F.isf(-np.expm1(-lam[upper]))
        lo, hi = F.support
        out = np.where(lam == 0, hi, out)
    return out[()] if out.ndim == 0 else out


def embed_increasing(lam, F: QuantileFn):
    """F^{-1}(1 - exp(-lam)); lam = 0 maps to the lower support end."""
    lam = _as_lam(lam)
    if F.family == "exponential":
        out = lam / F.params[0]
    elif F.family == "normal":
        mu, sd = F.params
        with np.errstate(divide="ignore"):
            z = np.where(lam > np.log(2.0), -special.ndtri(np.exp(-lam)), special.ndtri(-np.expm1(-lam)))
        out = mu + sd * z
    else:
        upper = lam > np.log(2.0)
        out = np.empty(lam.shape)
        out[~upper] = F.ppf(-np.expm1(-lam[~upper]))
        out[upper] = F.isf(np.exp(-lam[upper]))
        lo, hi = F.support
        out = np.where(lam == 0, lo, out)
    return out[()] if out.ndim == 0 else out


def embed(lam, F: QuantileFn, direction: str):
    if direction == DECREASING:
        return embed_decreasing(lam, F)
    if direction == INCREASING:
        return embed_increasing(lam, F)
    raise DomainError(f"unknown embedding direction {direction!r}")


@dataclass(frozen=True, eq=False)
class EmbeddingPlan:
    """Per-source directions and marginals plus the map from Lambda to the loss.

    Source layout: Gaussian [Z_1..Z_m, eps_1..eps_d]; t adds the scale
    variable G = V/r last; Clayton [E_1..E_d, mixing variable].
    """

    portfolio: Portfolio
    model: ModelSpec
    directions: tuple[str, ...]
    marginals: tuple[QuantileFn, ...]

    @property
    def D(self) -> int:
        return len(self.directions)

    def sources(self, lam) -> np.ndarray:
        """Embedded scalars X(t) for states ``lam`` of shape (n, D)."""
        lam = np.atleast_2d(lam)
        out = np.empty(lam.shape)
        # group identical (direction, marginal) pairs so each is one vectorized call
        groups: dict = {}
        for j, key in enumerate(zip(self.directions, self.marginals)):
            groups.setdefault(key, []).append(j)
        for (direction, F), cols in groups.items():
            out[:, cols] = embed(lam[:, cols], F, direction)
        return out

    def defaults(self, lam) -> np.ndarray:
        lam = np.atleast_2d(lam)
        p = self.portfolio
        X = self.sources(lam)
        if isinstance(self.model, ClaytonModel):
            h = clayton_threshold_psi(p, self.model.eta, self.model.marginal)
            E, G = X[:, :p.d], X[:, p.d]
            return E < G[:, None] * h
        m, d = p.m, p.d
        Z, eps = X[:, :m], X[:, m:m + d]
        num = Z @ p.loadings.T + p.b * eps
        if isinstance(self.model, TFactorModel):
            G = X[:, m + d]
            # sqrt(r/V) num > x  <=>  num > x sqrt(G) with G = V/r.
            return num > p.thresholds * np.sqrt(G)[:, None]
        return num > p.thresholds

    def loss(self, lam) -> np.ndarray:
        """S(X(t)) = c . B for each row of ``lam``."""
        return self.defaults(lam).astype(float) @ self.portfolio.costs


def build_embedding(p: Portfolio, model: ModelSpec) -> EmbeddingPlan:
    """Choose directions so the loss is nonincreasing in t along every path.

    Factor columns with all loadings >= 0 are embedded decreasingly and
    columns with all loadings <= 0 increasingly (Z is symmetric, so both
    reproduce N(0, 1) at t = 1); mixed-sign columns are rejected.
    """
    if isinstance(model, ClaytonModel):
        mix = model.mixing
        return EmbeddingPlan(p, model, (INCREASING,) * p.d + (DECREASING,),
                             (QuantileFn.exponential(),) * p.d + (mix,))
    if not isinstance(model, (GaussianModel, TFactorModel)):
        raise UnsupportedModelError(f"no embedding for {model!r}")
    A = p.loadings
    dirs = []
    for j in range(p.m):
        col = A[:, j]
        if np.all(col >= 0):
            dirs.append(DECREASING)
        elif np.all(col <= 0):
            dirs.append(INCREASING)
        else:
            raise UnsupportedModelError(f"factor {j} has loadings of both signs; the loss is not monotone in it")
    dirs += [DECREASING] * p.d
    margs = [QuantileFn.normal()] * (p.m + p.d)
    if isinstance(model, TFactorModel):
        if np.any(p.thresholds <= 0):
            raise UnsupportedModelError("the t embedding needs positive thresholds")
        dirs.append(INCREASING)
        margs.append(QuantileFn.gamma(model.r / 2.0, 2.0 / model.r))
    return EmbeddingPlan(p, model, tuple(dirs), tuple(margs))


def sample_embedded_losses(plan: EmbeddingPlan, n: int, t: float = 1.0, rng=None) -> np.ndarray:
    """Losses S(X(t)) from n independent forward paths evaluated at time t."""
    gen = as_generator(rng)
    chunk = max(1, 4_000_000 // plan.D)
    out = []
    done = 0
    while done < n:
        k = min(chunk, n - done)
        out.append(plan.loss(gen.standard_gamma(t, size=(k, plan.D))))
        done += k
    return np.concatenate(out) if out else np.empty(0)
