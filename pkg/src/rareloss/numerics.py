"""Quantile functions, bracketed root finding and the Kolmogorov-Smirnov distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special

from .errors import BracketError, DomainError, ParameterError

FAMILIES = ("normal", "t", "gamma", "beta", "exponential", "chi2")


@dataclass(frozen=True)
class QuantileFn:
    """A univariate continuous distribution addressed by its quantile function.

    Parameters per family:
        normal       (mean, sd)
        t            (r,)
        gamma        (shape, scale)
        beta         (a, b)
        exponential  (rate,)
        chi2         (r,)
    """

    family: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        fam = self.family
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if fam not in FAMILIES:
            raise ParameterError(f"unknown family {fam!r}")
        expected = {"normal": 2, "t": 1, "gamma": 2, "beta": 2, "exponential": 1, "chi2": 1}[fam]
        if len(p) != expected:
            raise ParameterError(f"{fam} takes {expected} parameter(s), got {len(p)}")
        positive = p[1:] if fam == "normal" else p
        if not all(math.isfinite(v) for v in p) or any(v <= 0 for v in positive):
            raise ParameterError(f"invalid {fam} parameters {p}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def normal(cls, mean=0.0, sd=1.0):
        return cls("normal", (mean, sd))

    @classmethod
    def student_t(cls, r):
        return cls("t", (r,))

    @classmethod
    def gamma(cls, shape, scale=1.0):
        return cls("gamma", (shape, scale))

    @classmethod
    def beta(cls, a, b):
        return cls("beta", (a, b))

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exponential", (rate,))

    @classmethod
    def chi2(cls, r):
        return cls("chi2", (r,))

    # -- distribution functions -------------------------------------------

    def _gamma_params(self):
        if self.family == "chi2":
            return self.params[0] / 2.0, 2.0
        return self.params

    @property
    def support(self) -> tuple[float, float]:
        if self.family in ("normal", "t"):
            return -np.inf, np.inf
        if self.family == "beta":
            return 0.0, 1.0
        return 0.0, np.inf

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "normal":
            mu, sd = self.params
            return special.ndtr((x - mu) / sd)
        if fam == "t":
            return special.stdtr(self.params[0], x)
        if fam == "exponential":
            return -np.expm1(-self.params[0] * np.maximum(x, 0.0))
        if fam in ("gamma", "chi2"):
            a, scale = self._gamma_params()
            return special.gammainc(a, np.maximum(x, 0.0) / scale)
        a, b = self.params
        return special.betainc(a, b, np.clip(x, 0.0, 1.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "normal":
            mu, sd = self.params
            return special.ndtr(-(x - mu) / sd)
        if fam == "t":
            return special.stdtr(self.params[0], -x)
        if fam == "exponential":
            return np.exp(-self.params[0] * np.maximum(x, 0.0))
        if fam in ("gamma", "chi2"):
            a, scale = self._gamma_params()
            return special.gammaincc(a, np.maximum(x, 0.0) / scale)
        a, b = self.params
        return special.betainc(b, a, 1.0 - np.clip(x, 0.0, 1.0))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam == "normal":
                mu, sd = self.params
                z = (x - mu) / sd
                return np.exp(-0.5 * z * z) / (sd * math.sqrt(2 * math.pi))
            if fam == "t":
                r = self.params[0]
                logc = special.gammaln((r + 1) / 2) - special.gammaln(r / 2) - 0.5 * math.log(r * math.pi)
                return np.exp(logc - (r + 1) / 2 * np.log1p(x * x / r))
            if fam == "exponential":
                rate = self.params[0]
                return np.where(x >= 0, rate * np.exp(-rate * x), 0.0)
            if fam in ("gamma", "chi2"):
                a, scale = self._gamma_params()
                y = x / scale
                dens = np.exp((a - 1) * np.log(y) - y - special.gammaln(a)) / scale
                return np.where(x > 0, dens, 0.0)
            a, b = self.params
            dens = np.exp((a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - special.betaln(a, b))
            return np.where((x > 0) & (x < 1), dens, 0.0)

    # -- quantiles --------------------------------------------------------

    def ppf(self, u):
        """Quantile at probability ``u`` (no domain check; 0 and 1 map to the support ends)."""
        u = np.asarray(u, dtype=float)
        fam = self.family
        if fam == "normal":
            mu, sd = self.params
            out = mu + sd * special.ndtri(u)
        elif fam == "exponential":
            out = -np.log1p(-u) / self.params[0]
        elif fam in ("gamma", "chi2"):
            a, scale = self._gamma_params()
            x0 = special.gammaincinv(a, u)
            out = scale * _polish(x0, u, lambda y: special.gammainc(a, y), _gamma_density(a), 0.0, np.inf)
        elif fam == "beta":
            a, b = self.params
            x0 = special.betaincinv(a, b, u)
            out = _polish(x0, u, lambda y: special.betainc(a, b, y), _beta_density(a, b), 0.0, 1.0)
        else:
            out = _t_ppf(self.params[0], u)
        return out[()] if out.ndim == 0 else out

    def isf(self, q):
        """Quantile at upper-tail probability ``q``, i.e. ppf(1 - q) without cancellation."""
        q = np.asarray(q, dtype=float)
        fam = self.family
        if fam == "normal":
            mu, sd = self.params
            out = mu - sd * special.ndtri(q)
        elif fam == "exponential":
            with np.errstate(divide="ignore"):
                out = -np.log(q) / self.params[0]
        elif fam in ("gamma", "chi2"):
            a, scale = self._gamma_params()
            x0 = special.gammainccinv(a, q)
            dens = _gamma_density(a)
            out = scale * _polish(x0, -q, lambda y: -special.gammaincc(a, y), dens, 0.0, np.inf)
        elif fam == "beta":
            a, b = self.params
            # Upper tail of Beta(a, b) at x is the lower tail of Beta(b, a) at 1 - x.
            # For q > 1/2 the lower-tail route avoids cancellation in 1 - y.
            y0 = special.betaincinv(b, a, q)
            y = _polish(y0, q, lambda w: special.betainc(b, a, w), _beta_density(b, a), 0.0, 1.0)
            out = np.where(q > 0.5, self.ppf(1.0 - q), 1.0 - y)
        else:
            out = -_t_ppf(self.params[0], q)
        return out[()] if out.ndim == 0 else out


def _gamma_density(a):
    def dens(y):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.exp((a - 1) * np.log(y) - y - special.gammaln(a))

    return dens


def _beta_density(a, b):
    def dens(y):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.exp((a - 1) * np.log(y) + (b - 1) * np.log1p(-y) - special.betaln(a, b))

    return dens


def _t_ppf(r, u):
    # Student t quantile through the regularized incomplete beta function:
    # for x < 0, F(x) = I_z(r/2, 1/2) / 2 with z = r / (r + x^2).
    u = np.asarray(u, dtype=float)
    lower = np.minimum(u, 1.0 - u)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = special.betaincinv(r / 2.0, 0.5, 2.0 * lower)
        w = special.betaincinv(0.5, r / 2.0, 1.0 - 2.0 * lower)  # w = 1 - z
        near_centre = lower > 0.25
        mag = np.where(near_centre, np.sqrt(r * w / (1.0 - w)), np.sqrt(r * (1.0 - z) / z))
    x0 = np.where(u < 0.5, -mag, mag)
    x0 = np.where(u == 0.5, 0.0, x0)
    dist = QuantileFn("t", (r,))
    return _polish(x0, u, dist.cdf, dist.pdf, -np.inf, np.inf)


def _polish(x0, target, fn, dfn, lo, hi, tol=1e-15, maxiter=60):
    """Safeguarded Newton on ``fn(x) = target`` with ``fn`` nondecreasing.

    ``x0`` is a starting point (typically from a closed-form or library
    inversion); the bracket shrinks at each step and Newton steps leaving it
    fall back to bisection, or to geometric expansion on an open side.
    """
    x = np.array(x0, dtype=float, copy=True)
    target = np.broadcast_to(np.asarray(target, dtype=float), x.shape)
    lo_b = np.full(x.shape, lo, dtype=float)
    hi_b = np.full(x.shape, hi, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    target = np.atleast_1d(target)
    lo_b = np.atleast_1d(lo_b)
    hi_b = np.atleast_1d(hi_b)
    active = np.isfinite(x) & np.isfinite(target)
    for _ in range(maxiter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xi = x[idx]
        g = fn(xi) - target[idx]
        done = np.abs(g) <= tol
        lo_i = np.where(g < 0, xi, lo_b[idx])
        hi_i = np.where(g > 0, xi, hi_b[idx])
        lo_b[idx] = lo_i
        hi_b[idx] = hi_i
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xi - g / dfn(xi)
        inside = np.isfinite(step) & (step > lo_i) & (step < hi_i)
        both = np.isfinite(lo_i) & np.isfinite(hi_i)
        expand_up = np.where(xi > 0, 2.0 * xi, xi + 1.0)
        expand_dn = np.where(xi < 0, 2.0 * xi, xi - 1.0)
        with np.errstate(invalid="ignore"):
            mid = 0.5 * (lo_i + hi_i)
        fallback = np.where(both, mid, np.where(np.isfinite(hi_i), expand_dn, expand_up))
        new = np.where(inside, step, fallback)
        stalled = (new == xi) | (both & (hi_i - lo_i <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xi))))
        x[idx] = np.where(done, xi, new)
        active[idx] = ~(done | stalled)
    return x[0] if scalar else x


def inv_cdf(q: QuantileFn, u):
    """Quantile of ``q`` at ``u`` in (0, 1); raises DomainError outside."""
    arr = np.asarray(u, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise DomainError("probability must lie strictly inside (0, 1)")
    return q.ppf(arr)


def find_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of a continuous monotone ``f`` on ``[lo, hi]``.

    Returns ``x`` with ``|f(x)| <= tol`` or located to within a bracket of
    width ``tol``.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    x = optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(x)


def ks_statistic(sample, cdf: Callable) -> float:
    """Sup-norm distance between the empirical CDF of ``sample`` and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise DomainError("KS statistic of an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
