"""Cross-entropy importance sampling for the t factor model.

The sampling density is a product of independent normals over the factor
and idiosyncratic variables (Z, eps).  Given (Z, eps) the loss is a step
function of the scale variable lambda = sqrt(V/r), so the conditional tail
probability is a single regularized incomplete gamma evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateError, DomainError, InfeasibleThresholdError, ParameterError
from .importance import replicate
from .models import TFactorModel, sample_losses
from .portfolio import Portfolio
from .report import EstimateReport
from .rng import as_generator

_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True, eq=False)
class CEParams:
    """Means and variances of the product-normal sampling density."""

    mu_z: np.ndarray
    var_z: np.ndarray
    mu_eps: np.ndarray
    var_eps: np.ndarray

    def __post_init__(self):
        for name in ("mu_z", "var_z", "mu_eps", "var_eps"):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.mu_z.shape != self.var_z.shape or self.mu_eps.shape != self.var_eps.shape:
            raise ParameterError("mean and variance vectors must have matching lengths")
        if np.any(self.var_z <= 0) or np.any(self.var_eps <= 0):
            raise ParameterError("all variances must be positive")

    @classmethod
    def standard(cls, m: int, d: int) -> "CEParams":
        return cls(np.zeros(m), np.ones(m), np.zeros(d), np.ones(d))

    def __eq__(self, other):
        if not isinstance(other, CEParams):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("mu_z", "var_z", "mu_eps", "var_eps"))

    def save(self, path) -> None:
        """Flat ``key = v1,v2,...`` text, one vector per line, shortest round-trip reprs."""
        with open(path, "w") as fh:
            for key in ("mu_z", "var_z", "mu_eps", "var_eps"):
                fh.write(f"{key} = {','.join(repr(float(v)) for v in getattr(self, key))}\n")

    @classmethod
    def load(cls, path) -> "CEParams":
        values = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, rhs = line.partition("=")
                rhs = rhs.strip()
                values[key.strip()] = [float(v) for v in rhs.split(",")] if rhs else []
        missing = {"mu_z", "var_z", "mu_eps", "var_eps"} - values.keys()
        if missing:
            raise ParameterError(f"{path}: missing keys {sorted(missing)}")
        return cls(values["mu_z"], values["var_z"], values["mu_eps"], values["var_eps"])


def elite_indices(losses, alpha: float) -> np.ndarray:
    """Sample indices of the order statistics L_(ceil(alpha N)), ..., L_(N).

    Ascending stable sort, so among tied losses the later sample index
    ranks higher.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    L = np.asarray(losses, dtype=float).ravel()
    if L.size == 0:
        raise DomainError("empty sample")
    from .cmc import order_index

    k = order_index(alpha, L.size)
    return np.argsort(L, kind="stable")[k - 1:]


def elite_sample(losses, alpha: float, latent: dict | None = None):
    """Elite losses (ascending) and, when given, the matching rows of each latent array."""
    idx = elite_indices(losses, alpha)
    L = np.asarray(losses, dtype=float).ravel()[idx]
    if latent is None:
        return L
    return L, {k: np.asarray(v)[idx] for k, v in latent.items()}


def ce_fit(elites: dict) -> CEParams:
    """Maximum-likelihood product-normal fit: means and 1/n variances of
    the elite ``Z`` and ``eps`` rows."""
    Z = np.atleast_2d(np.asarray(elites["Z"], dtype=float))
    E = np.atleast_2d(np.asarray(elites["eps"], dtype=float))
    if Z.shape[0] < 2 or E.shape[0] < 2:
        raise DegenerateError("need at least two elite samples")
    var_z, var_e = Z.var(axis=0), E.var(axis=0)
    if np.any(var_z <= 0) or np.any(var_e <= 0):
        raise DegenerateError("an elite coordinate has zero spread")
    return CEParams(Z.mean(axis=0), var_z, E.mean(axis=0), var_e)


def ce_pilot(p: Portfolio, model: TFactorModel, n: int, alpha: float, rng=None) -> CEParams:
    """Fit CE parameters from the elite fraction of a crude Monte Carlo pilot."""
    s = sample_losses(p, model, n, rng, keep_latent=True)
    _, lat = elite_sample(s.loss, alpha, {"Z": s.latent["Z"], "eps": s.latent["eps"]})
    return ce_fit(lat)


def t_conditional_tail(p: Portfolio, r: float, gamma: float, scores) -> np.ndarray:
    """P(L > gamma | X~) for latent scores X~ = A Z + b eps (rows).

    Obligor k defaults iff lambda < X~_k / x_k with lambda^2 ~ G(r/2, rate r/2).
    Sorting the ratios in decreasing order, the loss exceeds gamma iff
    lambda is below the ratio at which the cumulative cost first passes gamma.
    """
    x = p.thresholds
    if np.any(x <= 0):
        raise DomainError("the ratio representation needs positive thresholds")
    c = p.costs
    if gamma >= c.sum():
        raise InfeasibleThresholdError(f"gamma={gamma} is not below the total exposure {c.sum()}")
    R = np.atleast_2d(scores) / x
    order = np.argsort(-R, axis=1, kind="stable")
    R_sorted = np.take_along_axis(R, order, axis=1)
    cum = np.cumsum(c[order], axis=1)
    j = np.argmax(cum > gamma, axis=1)
    crit = R_sorted[np.arange(R.shape[0]), j]
    pos = crit > 0
    out = np.zeros(R.shape[0])
    out[pos] = special.gammainc(r / 2.0, 0.5 * r * crit[pos] ** 2)
    return out


def _log_density_ratio(params: CEParams, Zs, Es, U, V):
    # log f - log g, with (U, V) the standardized draws so (Z - mu)/sigma = U.
    lf = -0.5 * (np.sum(Zs * Zs, axis=1) + np.sum(Es * Es, axis=1))
    lg = -0.5 * (np.sum(U * U, axis=1) + np.sum(V * V, axis=1))
    lg -= 0.5 * (np.sum(np.log(params.var_z)) + np.sum(np.log(params.var_eps)))
    return lf - lg


def ce_t_samples(p: Portfolio, r: float, gamma: float, params: CEParams, n: int, rng=None) -> np.ndarray:
    """Per-draw values P(L > gamma | Z, eps) f/g with (Z, eps) ~ g."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if params.mu_z.size != p.m or params.mu_eps.size != p.d:
        raise ParameterError("CE parameter dimensions do not match the portfolio")
    gen = as_generator(rng)
    sd_z, sd_e = np.sqrt(params.var_z), np.sqrt(params.var_eps)
    chunk = max(1, _CHUNK_ELEMS // p.d)
    out = []
    done = 0
    while done < n:
        k = min(chunk, n - done)
        U = gen.standard_normal(size=(k, p.m))
        V = gen.standard_normal(size=(k, p.d))
        Z = params.mu_z + sd_z * U
        E = params.mu_eps + sd_e * V
        tail = t_conditional_tail(p, r, gamma, Z @ p.loadings.T + p.b * E)
        out.append(tail * np.exp(_log_density_ratio(params, Z, E, U, V)))
        done += k
    return np.concatenate(out)


def ce_t_estimate(p: Portfolio, r: float, gamma: float, params: CEParams, n: int, runs: int = 1,
                  seed: int = 0) -> EstimateReport:
    return replicate(lambda s: ce_t_samples(p, r, gamma, params, n, s).mean(), runs, seed, n,
                     model="t", method="ce", gamma=float(gamma))


def kl_fit_gain(params: CEParams) -> float:
    """KL divergence of the fitted density from the standard one (a size gauge for the tilt)."""
    def kl(mu, var):
        return 0.5 * float(np.sum(var + mu * mu - 1.0 - np.log(var)))

    return kl(params.mu_z, params.var_z) + kl(params.mu_eps, params.var_eps)

