"""Command-line entry point: estimate, quantile, levels and reproduce."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, ConvergenceError, RareLossError
from .experiment import (
    DEFAULT_TABLE_METHODS,
    METHODS,
    MODELS,
    ExperimentConfig,
    prepare,
    reproduce_table,
    run_experiment,
    run_quantile,
)
from .report import emit_csv, emit_json
from .rng import RngStream
from .splitting import adaptive_levels, build_embedding

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(sp):
    sp.add_argument("--config", help="flat JSON config file; flags override its values")
    sp.add_argument("--model", choices=MODELS)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--r", type=float, help="degrees of freedom (t model)")
    sp.add_argument("--eta", type=float, help="Clayton parameter")
    sp.add_argument("--mixing-scale", dest="mixing_scale", type=float)
    sp.add_argument("--d", type=int, help="benchmark portfolio size")
    sp.add_argument("--portfolio", help="portfolio CSV (k, c_k, x_k or p_k, a_1..a_m)")
    sp.add_argument("--gamma-n", dest="gamma_n", type=int, help="CMC sample size for the gamma pass")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rareloss", description="Rare-event estimators for credit portfolio losses.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="estimate P(L > gamma) with one method over R runs")
    _common(est)
    est.add_argument("--method", choices=METHODS + ("ds_ff", "ds_fe"))
    est.add_argument("--schedule", help="level schedule file (splitting methods)")
    est.add_argument("--s", type=int, help="splitting factor / effort per level")
    est.add_argument("--L", type=int, help="number of levels for a uniform schedule")
    est.add_argument("--pilot-n", dest="pilot_n", type=int, help="CE pilot sample size")
    est.add_argument("--ce-params", dest="ce_params", help="saved CE parameter file")
    est.add_argument("--out", help="report file (default: stdout)")
    est.add_argument("--format", choices=("csv", "json"))

    q = sub.add_parser("quantile", help="VaR and CVaR at level alpha")
    _common(q)
    q.add_argument("--method", choices=("cmc", "is1", "is2"))
    q.add_argument("--out")

    lv = sub.add_parser("levels", help="choose level times adaptively and write a schedule file")
    _common(lv)
    lv.add_argument("--s", type=int, default=1000)
    lv.add_argument("--rho", type=float, default=0.5)
    lv.add_argument("--eps-t", dest="eps_t", type=float, default=1e-3)
    lv.add_argument("--eps-p", dest="eps_p", type=float, default=0.05)
    lv.add_argument("--policy", choices=("fixed_effort", "fixed_factor"), default="fixed_effort")
    lv.add_argument("--out", required=True)

    rp = sub.add_parser("reproduce", help="one row per alpha and method for a benchmark model")
    rp.add_argument("--model", choices=MODELS, required=True)
    rp.add_argument("--methods", nargs="+", choices=METHODS)
    rp.add_argument("--alphas", nargs="+", type=float, default=[0.95, 0.99, 0.995])
    rp.add_argument("--n", type=int, default=10_000)
    rp.add_argument("--runs", type=int, default=10)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--gamma-n", dest="gamma_n", type=int, default=100_000)
    rp.add_argument("--out")
    rp.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


_CONFIG_KEYS = ("model", "method", "alpha", "gamma", "n", "runs", "seed", "r", "eta", "mixing_scale", "d",
                "portfolio", "gamma_n", "schedule", "s", "L", "pilot_n", "ce_params", "out", "format")


def config_from_args(args, method_default: str = "cmc") -> ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if args.command == "levels":
        overrides["out"] = None
        overrides["s"] = None
    if args.command == "quantile":
        overrides["out"] = None
    if getattr(args, "config", None):
        return ExperimentConfig.from_json(args.config, overrides)
    doc = {k: v for k, v in overrides.items() if v is not None}
    doc.setdefault("method", method_default)
    return ExperimentConfig.from_dict(doc)


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _estimate(args) -> None:
    cfg = config_from_args(args)
    out, cfg.out = cfg.out, None
    rep = run_experiment(cfg)
    text = emit_json(rep) if cfg.format == "json" else emit_csv(rep)
    _write(text, out)


def _quantile(args) -> None:
    cfg = config_from_args(args)
    res = run_quantile(cfg)
    _write(json.dumps(res, indent=2) + "\n", args.out)


def _levels(args) -> None:
    cfg = config_from_args(args)
    ctx = prepare(cfg)
    plan = build_embedding(ctx.portfolio, ctx.model)
    sched = adaptive_levels(plan, ctx.gamma, args.s, args.rho, args.eps_t, args.eps_p,
                            RngStream(cfg.seed), policy=args.policy)
    sched.save(args.out)
    sys.stdout.write(f"gamma={ctx.gamma!r} levels={sched.L} times={list(sched.times)}\n")


def _reproduce(args) -> None:
    methods = tuple(args.methods) if args.methods else DEFAULT_TABLE_METHODS[args.model]
    rows = reproduce_table(args.model, methods, tuple(args.alphas), n=args.n, runs=args.runs, seed=args.seed,
                           gamma_n=args.gamma_n)
    _write(emit_json(rows) if args.format == "json" else emit_csv(rows), args.out)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        {"estimate": _estimate, "quantile": _quantile, "levels": _levels, "reproduce": _reproduce}[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except RareLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
