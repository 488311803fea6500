"""Command line: ``branchfluct {simulate,verify-laplace,limits,regime,stats,calibrate}``.

Experiments come from a YAML config file or a named preset; any config key
can be overridden with ``--set dotted.key=value`` (the value is parsed as
YAML) and the most common keys also have their own flags.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np
import yaml

from .. import limit_laws, stats
from ..model import ModelParams, Regime, classify_regime, norming
from ..stable_numerics.constants import constant_K, constant_K1, constant_K2
from ..testfunctions import TestFunction
from .config import ConfigError, apply_overrides, parse_config
from .presets import PRESETS, preset
from .records import RecordError, aggregate
from .runner import run_experiment

# flag name -> dotted config key
_FLAG_KEYS = {"replicas": "replicas", "seed": "seed", "dt": "dt", "T": "T", "workers": "workers",
              "block_size": "block_size", "output_dir": "output_dir", "box_half_width": "box.half_width",
              "bias_budget": "box.bias_budget", "d": "model.d", "alpha": "model.alpha", "beta": "model.beta",
              "V": "model.V"}


def _parse_set(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        out[key] = yaml.safe_load(value)
    return out


def _add_experiment_flags(p, config_required=False):
    p.add_argument("config", nargs=None if config_required else "?", help="YAML config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="use a named reference experiment")
    p.add_argument("--tier", choices=("smoke", "full"), default="smoke")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a (dotted) config key")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float, nargs="+")
    p.add_argument("--workers", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--box-half-width", dest="box_half_width", type=float)
    p.add_argument("--bias-budget", dest="bias_budget", type=float)
    for name in ("d",):
        p.add_argument(f"--{name}", type=int)
    for name in ("alpha", "beta", "V"):
        p.add_argument(f"--{name}", type=float)


def _experiment_raw(args, default_preset=None):
    if args.config:
        with open(args.config) as fh:
            raw = yaml.safe_load(fh)
    elif args.preset or default_preset:
        raw = preset(args.preset or default_preset, args.tier)
    else:
        raise SystemExit("give a config file or --preset")
    over = {key: getattr(args, flag) for flag, key in _FLAG_KEYS.items() if getattr(args, flag, None) is not None}
    if over.get("box.half_width") is not None:
        raw.setdefault("box", {}).pop("bias_budget", None)
    if over.get("box.bias_budget") is not None:
        raw.setdefault("box", {}).pop("half_width", None)
    over.update(_parse_set(args.set))
    return apply_overrides(raw, over)


def _run(raw):
    try:
        cfg = parse_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    res = run_experiment(cfg)
    print(f"artifact: {res.artifact_dir}")
    for name, chk in res.summary.get("assertions", {}).items():
        print(f"  {name}: {'PASS' if chk['passed'] else 'FAIL'}")
    if (res.artifact_dir / "failures.json").exists():
        print(f"  failures recorded in {res.artifact_dir / 'failures.json'}")
    return res.exit_code


def cmd_simulate(args):
    return _run(_experiment_raw(args))


def cmd_verify_laplace(args):
    raw = _experiment_raw(args, default_preset="laplace-reference")
    if raw.get("kind") != "laplace-triangle":
        print("verify-laplace needs a laplace-triangle config", file=sys.stderr)
        return 2
    return _run(raw)


def cmd_calibrate(args):
    raw = _experiment_raw(args, default_preset="calibration")
    if raw.get("kind") != "calibration":
        print("calibrate needs a calibration config", file=sys.stderr)
        return 2
    return _run(raw)


def _model(args):
    return ModelParams(args.d, args.alpha, args.beta, args.V, args.intensity)


def cmd_regime(args):
    p = _model(args)
    info = classify_regime(p)
    out = {"regime": info.regime.value, "critical_dimension": info.critical_dimension,
           "lower_dimension": info.lower_dimension}
    if args.T:
        out["norming"] = {}
        for T in args.T:
            try:
                out["norming"][f"{T:g}"] = norming(p, T)
            except ValueError as exc:
                out["norming"][f"{T:g}"] = str(exc)
    print(json.dumps(out, indent=2))
    return 0


def cmd_limits(args):
    p = _model(args)
    phi = TestFunction.gaussian(p.d, args.sigma, args.height)
    info = classify_regime(p)
    out = {"regime": info.regime.value, "K": constant_K(p.V, p.beta)}
    law = None
    if info.regime is Regime.CRITICAL:
        k2 = constant_K2(p)
        k1 = constant_K1(p)
        out.update({"K2": k2.value, "K2_error": k2.error, "K1": k1.value, "K1_error": k1.error})
        law = limit_laws.critical_law(p, phi, args.t, K1=k1.value)
    elif info.regime is Regime.LARGE:
        law = limit_laws.large_regime_law(p, phi, args.t)
        out["G_power_integral"] = law.meta["G_power_integral"]
    if law is not None:
        out["law"] = {"index": law.index, "rate": law.rate, "scale": law.scale, "t": args.t}
        z_max = args.z_max if args.z_max else (3.0 / law.rate) ** (1.0 / law.index)
        z = np.linspace(-z_max, z_max, args.n_z)
        out["cf_table"] = law.cf_table(z).tolist()
        if args.output:
            np.savetxt(args.output, law.cf_table(z), delimiter="\t", header="z\tcf_re\tcf_im", comments="")
    print(json.dumps(out, indent=2))
    return 0


def cmd_stats(args):
    try:
        table = aggregate(args.records)
    except RecordError as exc:
        print(f"record error: {exc}", file=sys.stderr)
        return 2
    x = table.values(args.column)
    out = {"n": len(x), "mean": float(np.mean(x)) if len(x) else math.nan}
    law = None
    if args.index is not None and args.rate is not None:
        law = limit_laws.StableLimitLaw(args.index, args.rate)
    if law is not None and len(x) >= stats.MIN_COUNT:
        z = stats.default_z_grid(args.z_max or (3.0 / law.rate) ** (1.0 / law.index), args.n_z)
        res = stats.cf_distance(x, law, z, seed=args.seed)
        out["cf_distance"] = {"statistic": res.statistic, "threshold": res.threshold, "passed": res.passed}
    if len(x) >= args.index_min_count:
        est = stats.stability_index_estimate(x, seed=args.seed, min_count=args.index_min_count)
        out["index_estimate"] = {"index": est.index, "ci": est.ci, "scale": est.scale}
    print(json.dumps(out, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="branchfluct", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment from a config or preset")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-laplace", help="Monte Carlo vs solver comparison of the Laplace functional")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_verify_laplace)

    p = sub.add_parser("calibrate", help="null rejection rates of the statistical tests")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_calibrate)

    for name, fn, hlp in (("regime", cmd_regime, "regime and norming for a parameter triple"),
                          ("limits", cmd_limits, "limit constants and CF tables")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--beta", type=float, required=True)
        p.add_argument("--V", type=float, default=1.0)
        p.add_argument("--intensity", type=float, default=1.0)
        p.set_defaults(func=fn)
        if name == "regime":
            p.add_argument("--T", type=float, nargs="*")
        else:
            p.add_argument("--sigma", type=float, default=1.0, help="width of the Gaussian test function")
            p.add_argument("--height", type=float, default=1.0)
            p.add_argument("--t", type=float, default=1.0)
            p.add_argument("--z-max", dest="z_max", type=float)
            p.add_argument("--n-z", dest="n_z", type=int, default=21)
            p.add_argument("--output", help="also write the CF table as TSV")

    p = sub.add_parser("stats", help="statistics of a column of merged record files")
    p.add_argument("records", nargs="+")
    p.add_argument("--column", default="X@1")
    p.add_argument("--index", type=float, help="index of the reference stable law")
    p.add_argument("--rate", type=float, help="rate of the reference stable law")
    p.add_argument("--z-max", dest="z_max", type=float)
    p.add_argument("--n-z", dest="n_z", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index-min-count", dest="index_min_count", type=int, default=10_000)
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args))


if __name__ == "__main__":
    raise SystemExit(main())
