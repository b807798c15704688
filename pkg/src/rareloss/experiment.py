"""Experiment configuration, dispatch to the estimators, and table reproduction."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field

from .cmc import cmc_tail_prob, cmc_var, cmc_var_cvar
from .cross_entropy import CEParams, ce_pilot, ce_t_estimate
from .errors import ConfigError
from .importance import (
    is_var_cvar,
    mean_shift_tail_bound,
    one_step_estimate,
    one_step_samples,
    replicate,
    two_step_estimate,
    two_step_samples,
)
from .models import model_from_tag, sample_losses
from .portfolio import Portfolio, build_benchmark_portfolio, load_portfolio_csv
from .report import EstimateReport
from .rng import GAMMA_PASS_STREAM, PILOT_STREAM, RngStream
from .splitting import LevelSchedule, build_embedding, ds_estimate

MODELS = ("gaussian", "t", "clayton")
METHODS = ("cmc", "is1", "is2", "ce", "ds-ff", "ds-fe")
_SUPPORTED = {
    "cmc": MODELS,
    "is1": MODELS,
    "is2": ("gaussian",),
    "ce": ("t",),
    "ds-ff": MODELS,
    "ds-fe": MODELS,
}


@dataclass
class ExperimentConfig:
    """One (model, method) experiment.  ``gamma = None`` means: estimate the
    alpha-quantile by a crude Monte Carlo pass of ``gamma_n`` losses."""

    model: str = "gaussian"
    method: str = "cmc"
    alpha: float = 0.95
    gamma: float | None = None
    n: int = 10_000
    runs: int = 10
    seed: int = 0
    schedule: str | None = None
    out: str | None = None
    format: str = "csv"
    r: float = 3.0
    eta: float = 5.5
    mixing_scale: float = 1.0
    d: int = 1000
    portfolio: str | None = None
    gamma_n: int = 100_000
    pilot_n: int = 10_000
    ce_params: str | None = None
    s: int | None = None
    L: int = 10
    max_paths: int = 1_000_000

    def __post_init__(self):
        self.method = self.method.replace("_", "-")
        self.validate()

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.model not in _SUPPORTED[self.method]:
            raise ConfigError(f"method {self.method} is not available for the {self.model} model")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        for name in ("n", "runs", "gamma_n", "pilot_n", "L", "max_paths"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.s is not None and self.s < 2:
            raise ConfigError("s must be at least 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.gamma is not None and not math.isfinite(self.gamma):
            raise ConfigError("gamma must be finite")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a flat JSON object")
        doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def build_model(self):
        return model_from_tag(self.model, r=self.r, eta=self.eta, mixing_scale=self.mixing_scale)

    def build_portfolio(self) -> Portfolio:
        if self.portfolio:
            return load_portfolio_csv(self.portfolio, "t" if self.model == "t" else "gaussian", self.r)
        return build_benchmark_portfolio(self.d, 21, self.model, r=self.r)


@dataclass
class ExperimentContext:
    portfolio: Portfolio
    model: object
    gamma: float
    extra: dict = field(default_factory=dict)


def estimate_gamma(cfg: ExperimentConfig, p: Portfolio, model) -> float:
    """CMC alpha-quantile on a stream reserved for this pass."""
    losses = sample_losses(p, model, cfg.gamma_n, RngStream(cfg.seed, GAMMA_PASS_STREAM)).loss
    return cmc_var(losses, cfg.alpha)


def prepare(cfg: ExperimentConfig) -> ExperimentContext:
    p = cfg.build_portfolio()
    model = cfg.build_model()
    gamma = cfg.gamma if cfg.gamma is not None else estimate_gamma(cfg, p, model)
    if gamma >= p.total_exposure:
        raise ConfigError(f"gamma={gamma} is not below the total exposure {p.total_exposure}")
    return ExperimentContext(p, model, float(gamma))


def splitting_schedule(cfg: ExperimentConfig) -> LevelSchedule:
    policy = "fixed_effort" if cfg.method == "ds-fe" else "fixed_factor"
    if cfg.schedule:
        try:
            sched = LevelSchedule.load(cfg.schedule)
        except OSError as exc:
            raise ConfigError(f"cannot read schedule {cfg.schedule}: {exc}") from exc
        return sched if sched.policy == policy else sched.with_policy(policy, cfg.s)
    if cfg.s is not None:
        s = cfg.s
    elif policy == "fixed_effort":
        # effort parity: s L loss evaluations per run against n for the other methods
        s = max(2, cfg.n // cfg.L)
    else:
        s = 2
    return LevelSchedule.uniform(cfg.L, policy, s)


def run_experiment(cfg: ExperimentConfig, ctx: ExperimentContext | None = None) -> EstimateReport:
    """Dispatch ``cfg.method`` for R runs and return the report (written to ``cfg.out`` if set)."""
    ctx = prepare(cfg) if ctx is None else ctx
    p, model, gamma = ctx.portfolio, ctx.model, ctx.gamma
    meta = dict(model=cfg.model, method=cfg.method, alpha=float(cfg.alpha), gamma=gamma)
    t0 = time.perf_counter()
    if cfg.method == "cmc":
        rep = replicate(lambda s: cmc_tail_prob(sample_losses(p, model, cfg.n, s).loss, gamma),
                        cfg.runs, cfg.seed, cfg.n, **meta)
    elif cfg.method == "is1":
        rep = one_step_estimate(p, model, gamma, cfg.n, cfg.runs, cfg.seed)
    elif cfg.method == "is2":
        shift = mean_shift_tail_bound(p, gamma, model)
        rep = two_step_estimate(p, gamma, shift, cfg.n, cfg.runs, cfg.seed, model)
        rep.extra["mu"] = [float(v) for v in shift.mu]
    elif cfg.method == "ce":
        if cfg.ce_params:
            params = CEParams.load(cfg.ce_params)
        else:
            params = ce_pilot(p, model, cfg.pilot_n, cfg.alpha, RngStream(cfg.seed, PILOT_STREAM))
        rep = ce_t_estimate(p, model.r, gamma, params, cfg.n, cfg.runs, cfg.seed)
    else:
        sched = splitting_schedule(cfg)
        plan = build_embedding(p, model)
        calls = 1 if sched.policy == "fixed_effort" else cfg.n
        rep = ds_estimate(plan, gamma, sched, cfg.runs, cfg.seed, calls, cfg.max_paths)
    rep.model, rep.method, rep.alpha, rep.gamma = cfg.model, cfg.method, float(cfg.alpha), gamma
    rep.elapsed_ms = 1000.0 * (time.perf_counter() - t0)
    if cfg.out:
        from .report import write_report

        write_report(rep, cfg.out, cfg.format)
    return rep


def run_quantile(cfg: ExperimentConfig) -> dict:
    """VaR and CVaR at ``cfg.alpha`` from n * runs losses (CMC) or a twisted sample (IS)."""
    p, model = cfg.build_portfolio(), cfg.build_model()
    total = cfg.n * cfg.runs
    stream = RngStream(cfg.seed)
    if cfg.method == "cmc":
        var, cvar = cmc_var_cvar(sample_losses(p, model, total, stream).loss, cfg.alpha)
        return {"model": cfg.model, "method": "cmc", "alpha": cfg.alpha, "var": var, "cvar": cvar, "n": total}
    if cfg.method not in ("is1", "is2"):
        raise ConfigError("quantile supports the cmc, is1 and is2 methods")
    gamma = cfg.gamma if cfg.gamma is not None else estimate_gamma(cfg, p, model)
    if cfg.method == "is1":
        _, L, W = one_step_samples(p, model, gamma, total, stream)
    else:
        shift = mean_shift_tail_bound(p, gamma, model)
        _, L, W = two_step_samples(p, gamma, shift.mu, total, stream)
    var, cvar = is_var_cvar(L, W, cfg.alpha)
    return {"model": cfg.model, "method": cfg.method, "alpha": cfg.alpha, "var": var, "cvar": cvar,
            "n": total, "twist_gamma": gamma}


def reproduce_table(model: str, methods=("is2", "ds-fe"), alphas=(0.95, 0.99, 0.995), *, n: int = 10_000,
                    runs: int = 10, seed: int = 0, **overrides) -> list[EstimateReport]:
    """One report per (alpha, method), each at the CMC alpha-quantile of that alpha."""
    rows = []
    for alpha in alphas:
        base = ExperimentConfig(model=model, method="cmc", alpha=alpha, n=n, runs=runs, seed=seed, **overrides)
        ctx = prepare(base)
        for method in methods:
            cfg = dataclasses.replace(base, method=method, gamma=ctx.gamma)
            rows.append(run_experiment(cfg, ExperimentContext(ctx.portfolio, ctx.model, ctx.gamma)))
    return rows


DEFAULT_TABLE_METHODS = {
    "gaussian": ("is2", "ds-fe"),
    "t": ("ce", "ds-fe"),
    "clayton": ("is1", "ds-fe"),
}
