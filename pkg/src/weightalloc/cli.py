"""Command-line front end.

    weightalloc estimate   --data sample.csv --weight '{"kind":"indicator","p":0.9}'
    weightalloc true-value --model '{"kind":"self","marginal":{"kind":"exponential","rate":1}}' --weight ...
    weightalloc variance   --data sample.csv --weight ... --method plugin
    weightalloc simulate   experiment.json

JSON specs may be given inline or as ``@path``.  Results go to stdout as
JSON; failures print an error object to stderr and exit with

    2  config / parse error (bad JSON spec, missing file)
    3  data error (empty or malformed sample)
    4  math / domain error (zero denominator, divergence)
    5  experiment aborted (too many failed replications)
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import _config as cfg
from .asymptotics import bootstrap_variance, confidence_interval, sigma_sq_oracle, sigma_sq_plugin
from .distributions import SelfRisk, model_from_json, true_allocation
from .empirical import ESTIMATORS, read_sample
from .errors import InvalidSpecError, WeightAllocError
from .montecarlo import ExperimentConfig, load_config, run_experiment
from .weights import weight_from_json


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _clean(obj.item())
    return obj


def _emit(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(_clean(obj), indent=2) + "\n")


def _spec_text(arg: str) -> str:
    if arg.startswith("@"):
        try:
            with open(arg[1:]) as fh:
                return fh.read()
        except OSError as exc:
            raise InvalidSpecError(f"cannot read {arg[1:]}: {exc}") from None
    return arg


def _load_sample(path):
    try:
        return read_sample(path)
    except FileNotFoundError:
        raise InvalidSpecError(f"data file not found: {path}") from None
    except OSError as exc:
        raise InvalidSpecError(f"cannot read {path}: {exc}") from None


def cmd_estimate(args) -> int:
    w = weight_from_json(_spec_text(args.weight))
    s = _load_sample(args.data)
    if args.level is not None:
        if args.variant != "simple":
            raise InvalidSpecError("confidence intervals are built around the simple estimator")
        rep = confidence_interval(s, w, args.level, args.method, seed=args.seed, B=args.bootstrap_b)
    else:
        rep = ESTIMATORS[args.variant](s, w)
    _emit(rep.to_dict())
    return 0


def cmd_true_value(args) -> int:
    model = model_from_json(_spec_text(args.model))
    w = weight_from_json(_spec_text(args.weight))
    out = {"quantity": "pi" if isinstance(model, SelfRisk) else "Pi", "value": true_allocation(model, w)}
    try:
        vr = sigma_sq_oracle(model, w, args.grid_size, args.truncation)
        out.update(
            sigma_sq=vr.sigma_sq,
            sigma1_sq=vr.sigma1_sq,
            sigma2_sq=vr.sigma2_sq,
            w_integral=vr.w_integral,
            diagnostics={"grid_size": vr.grid_size, "truncation": vr.truncation, **vr.diagnostics},
        )
    except WeightAllocError as exc:
        out.update(sigma_sq=None, sigma_sq_error=f"{type(exc).__name__}: {exc}")
    _emit(out)
    return 0


def cmd_variance(args) -> int:
    w = weight_from_json(_spec_text(args.weight))
    if args.method == "oracle":
        if args.model is None:
            raise InvalidSpecError("--method oracle needs --model")
        vr = sigma_sq_oracle(model_from_json(_spec_text(args.model)), w, args.grid_size, args.truncation)
    else:
        if args.data is None:
            raise InvalidSpecError(f"--method {args.method} needs --data")
        s = _load_sample(args.data)
        if args.method == "plugin":
            vr = sigma_sq_plugin(s, w)
        else:
            vr = bootstrap_variance(s, w, B=args.bootstrap_b, seed=args.seed)
    _emit(vr.to_dict())
    return 0


def _fmt(v):
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(v)


def cmd_simulate(args) -> int:
    c = load_config(args.config)
    overrides = {
        "master_seed": args.seed,
        "ci_level": args.level,
        "variance_method": args.method,
        "grid_size": args.grid_size,
        "truncation": args.truncation,
        "workers": args.workers,
        "output_path": args.output,
    }
    d = c.to_dict()
    d.update({k: v for k, v in overrides.items() if v is not None})
    c = ExperimentConfig.from_dict(d)
    if c.replications == 1:
        print("warning: statistics degenerate (replications=1)", file=sys.stderr)
    result = run_experiment(c)
    jpath, cpath = result.write(c.output_path)
    for row in result.rows:
        print(
            f"n={row.n} mean={_fmt(row.mean_estimate)} bias={_fmt(row.bias)} rmse={_fmt(row.rmse)} "
            f"scaled_var={_fmt(row.scaled_variance)} ks={_fmt(row.ks_statistic)} "
            f"coverage={_fmt(row.coverage)} failures={row.failures}"
        )
    print(f"wrote {jpath} {cpath}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weightalloc", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate a weighted allocation/premium from a CSV sample")
    e.add_argument("--data", required=True, help="CSV with header 'x,y' or 'x'")
    e.add_argument("--weight", required=True, help="weight JSON, inline or @file")
    e.add_argument("--variant", choices=sorted(ESTIMATORS), default="simple", help="estimator (default: simple)")
    e.add_argument("--level", type=float, help="also report a confidence interval at this level")
    e.add_argument("--method", choices=("plugin", "bootstrap"), default="plugin",
                   help="variance estimate for the interval (default: plugin)")
    e.add_argument("--seed", type=int, default=0, help="bootstrap seed (default: 0)")
    e.add_argument("--bootstrap-b", type=int, default=1000, help="bootstrap resamples (default: 1000)")
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("true-value", help="quadrature value of the functional and its asymptotic variance")
    t.add_argument("--model", required=True, help="model JSON, inline or @file")
    t.add_argument("--weight", required=True, help="weight JSON, inline or @file")
    t.add_argument("--grid-size", type=int, default=cfg.DEFAULT_GRID_SIZE, help="cells in the variance grid")
    t.add_argument("--truncation", type=float, default=cfg.DEFAULT_TRUNCATION, help="endpoint truncation")
    t.set_defaults(func=cmd_true_value)

    v = sub.add_parser("variance", help="asymptotic variance: plug-in or bootstrap from data, or oracle from a model")
    v.add_argument("--data", help="CSV sample (plugin, bootstrap)")
    v.add_argument("--model", help="model JSON (oracle)")
    v.add_argument("--weight", required=True, help="weight JSON, inline or @file")
    v.add_argument("--method", choices=("plugin", "bootstrap", "oracle"), default="plugin",
                   help="variance method (default: plugin)")
    v.add_argument("--seed", type=int, default=0, help="bootstrap seed (default: 0)")
    v.add_argument("--bootstrap-b", type=int, default=1000, help="bootstrap resamples (default: 1000)")
    v.add_argument("--grid-size", type=int, default=cfg.DEFAULT_GRID_SIZE, help="cells in the oracle grid")
    v.add_argument("--truncation", type=float, default=cfg.DEFAULT_TRUNCATION, help="oracle endpoint truncation")
    v.set_defaults(func=cmd_variance)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    s.add_argument("config", help="experiment config JSON file")
    s.add_argument("--seed", type=int, help="override master_seed")
    s.add_argument("--level", type=float, help="override ci_level")
    s.add_argument("--method", choices=("oracle", "plugin", "bootstrap"), help="override variance_method")
    s.add_argument("--grid-size", type=int, help="override the oracle grid size")
    s.add_argument("--truncation", type=float, help="override the oracle truncation")
    s.add_argument("--workers", type=int, help="threads for replications")
    s.add_argument("--output", help="override output_path (directory, created if missing)")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WeightAllocError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}, sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
