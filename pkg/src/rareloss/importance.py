"""Importance sampling by exponential twisting of conditional default probabilities.

Twisting works in logit space: the twisted probability of obligor k is
expit(logit P_k + theta c_k) and the cumulant is
sum_k logaddexp(log(1 - P_k), log P_k + theta c_k), so neither large
theta c_k nor tiny P_k overflows or cancels.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import ConvergenceError, DomainError, InfeasibleThresholdError, UnsupportedModelError
from .models import (
    ClaytonModel,
    GaussianModel,
    ModelSpec,
    TFactorModel,
    clayton_conditional_log_pd,
    gaussian_pd_argument,
    t_conditional_log_pd,
)
from .portfolio import Portfolio
from .report import EstimateReport
from .rng import RngStream, as_generator

_CHUNK_ELEMS = 4_000_000
_THETA_TOL = 1e-13
_MAX_ITER = 1200


@dataclass(frozen=True)
class TwistState:
    """theta, the twisted probabilities and log E[exp(theta L)] (batched along the leading axis)."""

    theta: float | np.ndarray
    twisted_probs: np.ndarray
    log_mgf: float | np.ndarray


def _log_pair(probs):
    p = np.asarray(probs, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise DomainError("probabilities must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        return np.log(p), np.log1p(-p)


def _twist_from_logs(lp, lq, c, theta):
    theta = np.asarray(theta, dtype=float)
    th = theta[..., None] if theta.ndim else theta
    shifted = lp + th * c
    log_mgf = np.sum(np.logaddexp(lq, shifted), axis=-1)
    with np.errstate(invalid="ignore"):
        logit = shifted - lq
    # P = 1 gives logit +inf, P = 0 gives -inf; both are handled by expit.
    logit = np.where(np.isnan(logit), np.where(lq == -np.inf, np.inf, -np.inf), logit)
    return special.expit(logit), log_mgf


def exp_twist(probs, c, theta) -> TwistState:
    """P_k e^{theta c_k} / (1 + P_k (e^{theta c_k} - 1)) and the cumulant at theta."""
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr < 0) or np.any(np.isnan(theta_arr)):
        raise DomainError("theta must be nonnegative")
    lp, lq = _log_pair(probs)
    tp, lm = _twist_from_logs(lp, lq, np.asarray(c, dtype=float), theta_arr)
    if theta_arr.ndim == 0:
        if theta_arr == 0:
            # no twist: return the input probabilities bit for bit
            tp, lm = np.array(probs, dtype=float), 0.0
        lm = float(lm)
        theta = float(theta_arr)
    return TwistState(theta, tp, lm)


def twisted_mean(probs, c, theta) -> float:
    return float(np.asarray(c) @ exp_twist(probs, c, theta).twisted_probs)


def solve_theta_logs(lp, lq, c, gamma: float) -> np.ndarray:
    """Batched root of sum_k c_k P_{k,theta} = gamma, theta >= 0.

    ``lp``/``lq`` hold log P and log(1 - P) with one row per conditioning
    draw.  Rows whose untwisted mean already reaches gamma get exactly 0;
    rows where gamma is unreachable (too many P_k = 0) also get 0, since
    their loss can never exceed gamma.  Safeguarded Newton inside a
    bracket whose upper end doubles until it straddles the root.
    """
    c = np.asarray(c, dtype=float)
    if gamma >= c.sum():
        raise InfeasibleThresholdError(f"gamma={gamma} is not below the total exposure {c.sum()}")
    lp = np.atleast_2d(lp)
    lq = np.atleast_2d(lq)
    n = lp.shape[0]
    theta = np.zeros(n)
    reachable = np.where(lp > -np.inf, c, 0.0).sum(axis=1) > gamma
    base = special.expit(_safe_logit(lp, lq)) @ c
    idx = np.flatnonzero(reachable & (base < gamma))
    if idx.size == 0:
        return theta
    lp_a, lq_a = lp[idx], lq[idx]
    logit0 = _safe_logit(lp_a, lq_a)
    lo = np.zeros(idx.size)
    hi = np.full(idx.size, np.inf)
    th = np.zeros(idx.size)
    tol = _THETA_TOL * max(1.0, gamma)
    log_gamma = math.log(gamma)
    active = np.ones(idx.size, dtype=bool)
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        a = np.flatnonzero(active)
        s = special.expit(logit0[a] + th[a, None] * c)
        mean = s @ c
        g = mean - gamma
        done = np.abs(g) <= tol
        # Newton on log(mean) - log(gamma): nearly linear in theta when all P_k are small.
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.log(mean) - log_gamma
            dh = ((s * (1.0 - s)) @ (c * c)) / mean
        lo[a] = np.where(g < 0, th[a], lo[a])
        hi[a] = np.where(g > 0, th[a], hi[a])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = th[a] - h / dh
        # Until an upper bracket exists, steps may at most quadruple theta.
        cap = np.where(np.isfinite(hi[a]), hi[a], np.maximum(4.0 * th[a], 2.0))
        inside = np.isfinite(step) & (step > lo[a]) & (step < cap)
        fallback = np.where(np.isfinite(hi[a]), 0.5 * (lo[a] + hi[a]), np.maximum(2.0 * lo[a], 1.0))
        new = np.where(inside, step, fallback)
        width_ok = np.isfinite(hi[a]) & (hi[a] - lo[a] <= 4 * np.finfo(float).eps * np.maximum(1.0, hi[a]))
        th[a] = np.where(done, th[a], new)
        active[a] = ~(done | width_ok)
    if active.any():
        raise ConvergenceError("theta iteration did not converge", best=th)
    theta[idx] = th
    return theta


def _safe_logit(lp, lq):
    with np.errstate(invalid="ignore"):
        logit = lp - lq
    return np.where(np.isnan(logit), np.where(lq == -np.inf, np.inf, -np.inf), logit)


def solve_theta(probs, c, gamma: float) -> float:
    """theta >= 0 with twisted mean loss equal to gamma (0 if c.P >= gamma)."""
    c = np.asarray(c, dtype=float)
    lp, lq = _log_pair(probs)
    if gamma >= c.sum():
        raise InfeasibleThresholdError(f"gamma={gamma} is not below the total exposure {c.sum()}")
    if c[lp > -np.inf].sum() <= gamma:
        raise InfeasibleThresholdError("gamma exceeds the largest attainable loss given these probabilities")
    return float(solve_theta_logs(lp[None, :], lq[None, :], c, gamma)[0])


def one_step_lr(loss, twist: TwistState):
    """W = exp(-theta L + log_mgf)."""
    out = np.exp(-np.asarray(twist.theta) * np.asarray(loss, dtype=float) + np.asarray(twist.log_mgf))
    return float(out) if np.ndim(out) == 0 else out


# -- conditioning variables per model --------------------------------------


def _conditional_logs(p: Portfolio, model: ModelSpec, n: int, gen, shift=None):
    """Draw the common factors and return (log P, log(1-P), extra log-weight)."""
    if isinstance(model, ClaytonModel):
        lam = gen.gamma(1.0 / model.eta, model.mixing_scale, size=n)
        lp, lq = clayton_conditional_log_pd(p, lam, model.eta, model.marginal)
        return lp, lq, np.zeros(n)
    Z = gen.standard_normal(size=(n, p.m))
    log_w = np.zeros(n)
    if shift is not None:
        Z = Z + shift
        log_w = -Z @ shift + 0.5 * float(shift @ shift)
    if isinstance(model, TFactorModel):
        V = 2.0 * gen.standard_gamma(model.r / 2.0, size=n)
        lp, lq = t_conditional_log_pd(p, Z, V, model.r)
        return lp, lq, log_w
    w = gaussian_pd_argument(p, Z)
    return special.log_ndtr(w), special.log_ndtr(-w), log_w


def one_step_samples(p: Portfolio, model: ModelSpec, gamma: float, n: int, rng=None, *, shift=None):
    """Per-draw values W 1{L > gamma} and the losses, under the twisted measure."""
    if n < 1:
        raise DomainError("n must be at least 1")
    gen = as_generator(rng)
    c = p.costs
    chunk = max(1, _CHUNK_ELEMS // p.d)
    vals, losses, weights = [], [], []
    done = 0
    while done < n:
        k = min(chunk, n - done)
        lp, lq, log_w = _conditional_logs(p, model, k, gen, shift)
        theta = solve_theta_logs(lp, lq, c, gamma)
        tp, log_mgf = _twist_from_logs(lp, lq, c, theta)
        B = gen.random(size=(k, p.d)) < tp
        L = B.astype(float) @ c
        W = np.exp(-theta * L + log_mgf + log_w)
        vals.append(np.where(L > gamma, W, 0.0))
        losses.append(L)
        weights.append(W)
        done += k
    return np.concatenate(vals), np.concatenate(losses), np.concatenate(weights)


def replicate(run_once, runs: int, seed: int, n_per_run: int, **meta) -> EstimateReport:
    """Run ``run_once(stream)`` on replication streams 0..R-1 of ``seed``."""
    if runs < 1:
        raise DomainError("need at least one run")
    t0 = time.perf_counter()
    per_run = [float(run_once(RngStream(seed).replication(r))) for r in range(runs)]
    elapsed = 1000.0 * (time.perf_counter() - t0)
    return EstimateReport.from_runs(per_run, n_per_run, seed, elapsed, **meta)


def one_step_estimate(p: Portfolio, model: ModelSpec, gamma: float, n: int, runs: int = 1,
                      seed: int = 0) -> EstimateReport:
    """One-step twisted estimator of P(L > gamma), R independent runs of size n."""
    return replicate(lambda s: one_step_samples(p, model, gamma, n, s)[0].mean(), runs, seed, n,
                     model=model.name, method="is1", gamma=float(gamma))


# -- factor mean shift (Gaussian model) --------------------------------------


@dataclass(frozen=True)
class MeanShift:
    mu: np.ndarray
    objective_value: float


def _require_gaussian(model):
    if model is not None and not isinstance(model, GaussianModel):
        raise UnsupportedModelError("the factor mean shift is defined for the Gaussian model only")


def tail_bound_objective(p: Portfolio, gamma: float, z) -> float:
    """log E[e^{theta L} | z] - theta gamma - z.z/2 at theta = theta(z)."""
    return _tail_bound_and_grad(p, gamma, np.asarray(z, dtype=float))[0]


def tail_bound_gradient(p: Portfolio, gamma: float, z) -> np.ndarray:
    return _tail_bound_and_grad(p, gamma, np.asarray(z, dtype=float))[1]


def _tail_bound_and_grad(p: Portfolio, gamma: float, z):
    w = gaussian_pd_argument(p, z)
    lp, lq = special.log_ndtr(w), special.log_ndtr(-w)
    theta = float(solve_theta_logs(lp[None], lq[None], p.costs, gamma)[0])
    tc = theta * p.costs
    log_mgf = float(np.sum(np.logaddexp(lq, lp + tc)))
    f = log_mgf - theta * gamma - 0.5 * float(z @ z)
    # theta(z) drops out of the gradient because d/dtheta vanishes at the root;
    # d/dP_k log(1 + P_k(e^{tc}-1)) = (1 - e^{-tc}) / ((1-P_k) e^{-tc} + P_k).
    log_phi = -0.5 * w * w - 0.5 * math.log(2.0 * math.pi)
    dlog = -np.expm1(-tc) * np.exp(log_phi - np.logaddexp(lq - tc, lp))
    grad = (dlog / p.b) @ p.loadings - z
    return f, grad


def mean_shift_constant_approx(p: Portfolio, gamma: float, model=None) -> MeanShift:
    """Smallest-norm z with E[L | Z = z] >= gamma.

    A bisection along the direction A^T c gives a feasible start; SLSQP
    then minimizes |z|^2 on the constraint, and the result is pushed
    radially onto the feasible side of the boundary.
    """
    _require_gaussian(model)
    c = p.costs
    if gamma >= c.sum():
        raise InfeasibleThresholdError("gamma is not below the total exposure")

    def cond_mean(z):
        return float(special.ndtr(gaussian_pd_argument(p, z)) @ c)

    zero = np.zeros(p.m)
    if cond_mean(zero) >= gamma or p.m == 0:
        if p.m == 0 and cond_mean(zero) < gamma:
            raise InfeasibleThresholdError("no factors to shift and the conditional mean is below gamma")
        return MeanShift(zero, tail_bound_objective(p, gamma, zero))
    u = p.loadings.T @ c
    norm = np.linalg.norm(u)
    if norm == 0:
        raise InfeasibleThresholdError("factor loadings are all zero; the mean cannot be shifted")
    u = u / norm
    t_star = _ray_boundary(lambda t: cond_mean(t * u) - gamma)
    start = t_star * u
    res = optimize.minimize(
        lambda z: float(z @ z), start, jac=lambda z: 2.0 * z, method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda z: cond_mean(z) - gamma,
                      "jac": lambda z: _cond_mean_grad(p, z)}],
        options={"maxiter": 500, "ftol": 1e-14},
    )
    z = start
    if np.all(np.isfinite(res.x)) and np.linalg.norm(res.x) > 0:
        dirn = res.x / np.linalg.norm(res.x)
        try:
            cand = _ray_boundary(lambda t: cond_mean(t * dirn) - gamma) * dirn
        except ConvergenceError:
            cand = start
        if cand @ cand < start @ start:
            z = cand
    return MeanShift(z, tail_bound_objective(p, gamma, z))


def _cond_mean_grad(p: Portfolio, z):
    w = gaussian_pd_argument(p, z)
    phi = np.exp(-0.5 * w * w) / math.sqrt(2.0 * math.pi)
    return (p.costs * phi / p.b) @ p.loadings


def _ray_boundary(g, tol=1e-13) -> float:
    """Smallest t >= 0 with g(t) >= 0 for g increasing, g(0) < 0; returns the feasible end."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if g(hi) >= 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceError("conditional mean never reaches gamma along the ray")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def mean_shift_tail_bound(p: Portfolio, gamma: float, model=None, *, maxiter: int = 500,
                          gtol: float = 1e-7) -> MeanShift:
    """argmax_z of the tail-bound objective, multi-start BFGS from 0 and from
    the constant-approximation point."""
    _require_gaussian(model)
    if gamma >= p.costs.sum():
        raise InfeasibleThresholdError("gamma is not below the total exposure")
    zero = np.zeros(p.m)
    if p.m == 0:
        return MeanShift(zero, tail_bound_objective(p, gamma, zero))
    starts = [zero]
    try:
        starts.append(mean_shift_constant_approx(p, gamma).mu)
    except (ConvergenceError, InfeasibleThresholdError):
        pass

    def negf(z):
        f, g = _tail_bound_and_grad(p, gamma, z)
        return -f, -g

    best_z, best_f, best_ok = None, -np.inf, False
    for s in starts:
        res = optimize.minimize(negf, s, jac=True, method="BFGS", options={"maxiter": maxiter, "gtol": gtol})
        f, g = _tail_bound_and_grad(p, gamma, res.x)
        ok = bool(res.success) or np.linalg.norm(g, np.inf) <= 1e-5 * max(1.0, abs(f))
        if f > best_f:
            best_z, best_f, best_ok = res.x, f, ok
    if not best_ok:
        raise ConvergenceError("tail-bound maximization did not converge", best=MeanShift(best_z, best_f))
    return MeanShift(np.asarray(best_z), float(best_f))


def two_step_estimate(p: Portfolio, gamma: float, shift: MeanShift | np.ndarray, n: int, runs: int = 1,
                      seed: int = 0, model: ModelSpec | None = None) -> EstimateReport:
    """Factor mean shift Z ~ N(mu, I) followed by the conditional twist."""
    _require_gaussian(model)
    mu = np.asarray(shift.mu if isinstance(shift, MeanShift) else shift, dtype=float)
    if mu.shape != (p.m,):
        raise DomainError(f"shift has shape {mu.shape}, expected ({p.m},)")
    model = GaussianModel()
    return replicate(lambda s: one_step_samples(p, model, gamma, n, s, shift=mu)[0].mean(), runs, seed, n,
                     model=model.name, method="is2", gamma=float(gamma))


def two_step_samples(p: Portfolio, gamma: float, mu, n: int, rng=None):
    return one_step_samples(p, GaussianModel(), gamma, n, rng, shift=np.asarray(mu, dtype=float))


# -- weighted quantiles ------------------------------------------------------


def is_var_cvar(losses, weights, alpha: float, convention: str = "quantile") -> tuple[float, float]:
    """Weighted VaR and CVaR from an importance sample.

    ``quantile``: VaR = inf{v : (1/N) sum W 1{L > v} <= 1 - alpha}, the
    smallest loss whose weighted tail strictly above it is at most 1 - alpha.
    With unit weights this is the ceil(alpha N)-th order statistic.

    ``tail_sum``: VaR = L_(j) for the smallest sorted position j with
    (1/N) sum_{k >= j} W_(k) <= 1 - alpha, counting L_(j) itself in the tail.

    CVaR = sum W L 1{L >= VaR} / (N (1 - alpha)) in both cases.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    L = np.asarray(losses, dtype=float).ravel()
    W = np.asarray(weights, dtype=float).ravel()
    if L.size == 0 or L.size != W.size:
        raise DomainError("losses and weights must be nonempty and of equal length")
    if np.any(W < 0) or not np.all(np.isfinite(W)):
        raise DomainError("weights must be finite and nonnegative")
    N = L.size
    order = np.argsort(L, kind="stable")
    Ls, Ws = L[order], W[order]
    budget = (1.0 - alpha) * N
    slack = 1e-9 * max(1.0, budget)
    # suffix[j] = sum of W_(k) for k >= j
    suffix = np.concatenate([np.cumsum(Ws[::-1])[::-1], [0.0]])
    if convention == "quantile":
        # weight strictly above L_(j): skip over ties at L_(j)
        after = np.searchsorted(Ls, Ls, side="right")
        tail = suffix[after]
    elif convention == "tail_sum":
        tail = suffix[:N]
    else:
        raise DomainError(f"unknown convention {convention!r}")
    ok = np.flatnonzero(tail <= budget + slack)
    if ok.size == 0:
        raise DomainError(f"tail weight never falls to 1 - alpha = {1 - alpha}")
    var = float(Ls[ok[0]])
    cvar = float(np.sum(W * L * (L >= var)) / budget)
    return var, cvar
