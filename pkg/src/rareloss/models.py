"""The three dependence models, their samplers and conditional default probabilities.

Conditional probabilities are also exposed as ``(log P, log(1 - P))`` pairs:
the importance samplers twist each Bernoulli in logit space and need both
tails without cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special

from .errors import DegenerateError, DomainError, ParameterError
from .numerics import QuantileFn
from .portfolio import Portfolio
from .rng import as_generator

_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class GaussianModel:
    name: str = field(default="gaussian", init=False)


@dataclass(frozen=True)
class TFactorModel:
    """Multivariate t factor model with ``r`` degrees of freedom."""

    r: float = 3.0
    name: str = field(default="t", init=False)

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ParameterError(f"degrees of freedom must be positive, got {self.r}")


@dataclass(frozen=True)
class ClaytonModel:
    """Clayton copula with generator psi(u) = (u^-eta - 1)/eta.

    The shared mixing variable is G(1/eta, mixing_scale).  With
    ``mixing_scale = eta`` its Laplace transform is exactly psi^{-1} and
    the latent U_k are uniform; the default 1.0 is the benchmark setting.
    """

    eta: float = 5.5
    marginal: QuantileFn = field(default_factory=QuantileFn.exponential)
    mixing_scale: float = 1.0
    name: str = field(default="clayton", init=False)

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if not (math.isfinite(self.mixing_scale) and self.mixing_scale > 0):
            raise ParameterError("mixing_scale must be positive")

    @property
    def mixing(self) -> QuantileFn:
        return QuantileFn.gamma(1.0 / self.eta, self.mixing_scale)


ModelSpec = Union[GaussianModel, TFactorModel, ClaytonModel]


def model_from_tag(tag: str, *, r: float = 3.0, eta: float = 5.5, mixing_scale: float = 1.0) -> ModelSpec:
    if tag == "gaussian":
        return GaussianModel()
    if tag in ("t", "t_factor"):
        return TFactorModel(r)
    if tag == "clayton":
        return ClaytonModel(eta, mixing_scale=mixing_scale)
    raise ParameterError(f"unknown model {tag!r}")


@dataclass
class LossSample:
    """One or many draws of the portfolio loss with their latent variables.

    ``latent`` keys: ``Z``, ``eps`` and, for the t model, ``V``; for the
    Clayton model ``Lambda`` and ``E``.
    """

    loss: float | np.ndarray
    defaults: np.ndarray
    latent: dict


# -- Clayton generator ---------------------------------------------------


def clayton_psi(u, eta: float):
    """psi(u) = (u^-eta - 1)/eta, computed as expm1(-eta log u)/eta."""
    with np.errstate(divide="ignore"):
        return np.expm1(-eta * np.log(u)) / eta


def clayton_psi_inv(s, eta: float):
    """psi^{-1}(s) = (1 + eta s)^(-1/eta)."""
    return np.exp(-np.log1p(eta * np.asarray(s, dtype=float)) / eta)


def archimedean_copula_cdf_check(u, eta: float) -> float:
    """Clayton copula CDF psi^{-1}(sum_i psi(u_i))."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u > 1)):
        raise DomainError("copula arguments must lie in (0, 1]")
    return float(clayton_psi_inv(np.sum(clayton_psi(u, eta)), eta))


# -- conditional default probabilities -------------------------------------


def _check_z(p: Portfolio, Z):
    Z = np.asarray(Z, dtype=float)
    if Z.shape[-1] != p.m:
        raise DomainError(f"factor vector has length {Z.shape[-1]}, portfolio has m={p.m}")
    if not np.all(np.isfinite(Z)):
        raise DomainError("factors must be finite")
    return Z


def gaussian_pd_argument(p: Portfolio, Z, scale=1.0):
    """w_k = (a_k . Z - scale * x_k)/b_k, so that P_k = Phi(w_k).

    ``Z`` may be (m,) or (n, m); ``scale`` broadcasts against the batch.
    """
    Z = _check_z(p, Z)
    scale = np.asarray(scale, dtype=float)
    if Z.ndim == 2 and scale.ndim == 1:
        scale = scale[:, None]
    return (Z @ p.loadings.T - scale * p.thresholds) / p.b


def gaussian_conditional_log_pd(p: Portfolio, Z):
    w = gaussian_pd_argument(p, Z)
    return special.log_ndtr(w), special.log_ndtr(-w)


def gaussian_conditional_pd(p: Portfolio, Z):
    """P_k(Z) = Phi((a_k . Z - x_k)/b_k)."""
    return special.ndtr(gaussian_pd_argument(p, Z))


def _t_scale(V, r):
    V = np.asarray(V, dtype=float)
    if np.any(~(V > 0)):
        raise DomainError("V must be positive")
    if not r > 0:
        raise ParameterError("degrees of freedom must be positive")
    return np.sqrt(V / r)


def t_conditional_log_pd(p: Portfolio, Z, V, r: float):
    w = gaussian_pd_argument(p, Z, _t_scale(V, r))
    return special.log_ndtr(w), special.log_ndtr(-w)


def t_conditional_pd(p: Portfolio, Z, V, r: float):
    """P_k(Z, V) = Phi((a_k . Z - sqrt(V/r) x_k)/b_k)."""
    return special.ndtr(gaussian_pd_argument(p, Z, _t_scale(V, r)))


def clayton_threshold_psi(p: Portfolio, eta: float, marginal: QuantileFn) -> np.ndarray:
    """psi(F(x_k)) per obligor; rejects thresholds with F(x_k) in {0, 1}."""
    u = marginal.cdf(p.thresholds)
    if np.any((u <= 0) | (u >= 1)):
        raise DegenerateError("Clayton thresholds must satisfy 0 < F(x_k) < 1")
    return clayton_psi(u, eta)


def clayton_conditional_log_pd(p: Portfolio, lam, eta: float, marginal: QuantileFn):
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("mixing variable must be positive")
    h = clayton_threshold_psi(p, eta, marginal)
    rate = lam[..., None] * h if lam.ndim else lam * h
    # B_k = 1{E_k < lam psi(F(x_k))} with E_k ~ Exp(1).
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-rate)), -rate


def clayton_conditional_pd(p: Portfolio, lam, eta: float, marginal: QuantileFn | None = None):
    """P_k(lam) = 1 - exp(-lam psi(F(x_k)))."""
    marginal = QuantileFn.exponential() if marginal is None else marginal
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("mixing variable must be positive")
    h = clayton_threshold_psi(p, eta, marginal)
    rate = lam[..., None] * h if lam.ndim else lam * h
    return -np.expm1(-rate)


def conditional_log_pd(p: Portfolio, model: ModelSpec, latent: dict):
    """Dispatch on the model: returns (log P, log(1 - P)) given the common factors."""
    if isinstance(model, GaussianModel):
        return gaussian_conditional_log_pd(p, latent["Z"])
    if isinstance(model, TFactorModel):
        return t_conditional_log_pd(p, latent["Z"], latent["V"], model.r)
    return clayton_conditional_log_pd(p, latent["Lambda"], model.eta, model.marginal)


# -- samplers --------------------------------------------------------------


def _defaults_from_latent(p: Portfolio, model: ModelSpec, latent: dict) -> np.ndarray:
    if isinstance(model, ClaytonModel):
        h = clayton_threshold_psi(p, model.eta, model.marginal)
        lam = np.asarray(latent["Lambda"])
        rate = lam[..., None] * h if lam.ndim else lam * h
        # E < lam psi(F(x))  <=>  U = psi^{-1}(E/lam) > F(x)  <=>  X > x.
        return latent["E"] < rate
    num = latent["Z"] @ p.loadings.T + p.b * latent["eps"]
    if isinstance(model, TFactorModel):
        V = np.asarray(latent["V"])
        scale = np.sqrt(V / model.r)
        scale = scale[..., None] if scale.ndim else scale
        # sqrt(r/V) num > x  <=>  num > sqrt(V/r) x  (V > 0).
        return num > scale * p.thresholds
    return num > p.thresholds


def _draw_latent(p: Portfolio, model: ModelSpec, n: int, gen: np.random.Generator) -> dict:
    if isinstance(model, ClaytonModel):
        lam = gen.gamma(1.0 / model.eta, model.mixing_scale, size=n)
        E = gen.standard_exponential(size=(n, p.d))
        return {"Lambda": lam, "E": E}
    Z = gen.standard_normal(size=(n, p.m))
    eps = gen.standard_normal(size=(n, p.d))
    latent = {"Z": Z, "eps": eps}
    if isinstance(model, TFactorModel):
        latent["V"] = 2.0 * gen.standard_gamma(model.r / 2.0, size=n)
    return latent


def sample_losses(p: Portfolio, model: ModelSpec, n: int, rng=None, *, keep_latent: bool = False) -> LossSample:
    """``n`` i.i.d. losses under ``model``; chunked to bound memory.

    Latent variables (and default matrices) are kept only on request.
    """
    if n < 0:
        raise DomainError("sample size must be nonnegative")
    gen = as_generator(rng)
    chunk = max(1, _CHUNK_ELEMS // max(p.d, 1))
    losses, defaults, latents = [], [], []
    done = 0
    while done < n:
        k = min(chunk, n - done)
        lat = _draw_latent(p, model, k, gen)
        B = _defaults_from_latent(p, model, lat)
        losses.append(B.astype(float) @ p.costs)
        if keep_latent:
            defaults.append(B)
            latents.append(lat)
        done += k
    loss = np.concatenate(losses) if losses else np.empty(0)
    if not keep_latent:
        return LossSample(loss, np.empty((0, p.d), dtype=bool), {})
    B = np.concatenate(defaults) if defaults else np.empty((0, p.d), dtype=bool)
    lat = {key: np.concatenate([L[key] for L in latents]) for key in (latents[0] if latents else {})}
    return LossSample(loss, B, lat)


def sample_loss(p: Portfolio, model: ModelSpec, rng=None) -> LossSample:
    """A single loss draw with its defaults and latent variables."""
    s = sample_losses(p, model, 1, rng, keep_latent=True)
    latent = {k: (v[0] if np.ndim(v) else v) for k, v in s.latent.items()}
    return LossSample(float(s.loss[0]), s.defaults[0], latent)


def sample_clayton_copula(n: int, d: int, eta: float, rng=None) -> np.ndarray:
    """n draws of a d-dimensional Clayton copula vector U (uniform marginals).

    Marshall-Olkin construction with the mixing variable G(1/eta, eta),
    whose Laplace transform is psi^{-1}.
    """
    if not eta > 0:
        raise ParameterError("eta must be positive")
    gen = as_generator(rng)
    lam = gen.gamma(1.0 / eta, eta, size=n)
    E = gen.standard_exponential(size=(n, d))
    return clayton_psi_inv(E / lam[:, None], eta)


def kendall_tau(x, y) -> float:
    """Kendall's tau-a by concordance counting (O(n log n) via scipy)."""
    from scipy import stats

    return float(stats.kendalltau(x, y).statistic)
