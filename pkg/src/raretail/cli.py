"""Command-line front end.

Subcommands::

    raretail estimate          --dist SPEC | --data FILE  --n N (--b B | --gamma G)
    raretail asymptotic        --dist SPEC --n N (--b B | --target-p P)
    raretail thresholds        --regime heavy:alpha=2.5 ... --n N (--b B | --target-p P)
    raretail truncation-study  --dist SPEC ... --n N ... --target-p P ...
    raretail empirical-study   --dist SPEC ... --data-sizes N ...
    raretail bootstrap         --data FILE (single CI)  |  --dist SPEC --data-sizes N (coverage study)
    raretail evt               --data FILE (series + verdict)  |  --dist SPEC --data-sizes N
    raretail experiment run CONFIG.json

SPEC is either a JSON object ``{"family": ..., "params": {...}}`` or the
shorthand ``family:key=value,key=value``. Study subcommands accept
``--config`` as well; flags given on the command line replace config keys.

Results go to stdout as JSON, or into ``--output-dir`` as JSON, CSV and SVG
files. Failures print ``{"error": code, "message": ...}`` to stderr and exit
with status 1. The worker count comes from ``--workers`` or the
``RARETAIL_WORKERS`` environment variable.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    heavy_asymptotic,
    light_asymptotic,
    reliable_truncation_level,
    solve_level,
    solve_tilt,
    unreliable_truncation_level,
)
from .bootstrap import InnerEstimator, gpd_bootstrap_ci, nonparam_bootstrap_ci
from .config import load_config
from .distributions import EmpiricalDistribution, from_spec
from .estimators import cond_mc_bias_bound, estimate
from .evt import HeavyTailDetector, default_window, moment_series, pickands_series
from .exceptions import ConfigError, ParameterDomainError, RareTailError
from .experiments import _jsonable, run_experiment
from .plots import line_plot_svg

__all__ = ["main", "build_parser", "parse_dist"]


def _number(text):
    try:
        v = json.loads(text)
    except json.JSONDecodeError:
        return text
    return v


def parse_dist(text):
    """Parse a distribution spec from JSON or ``family:key=value,...`` shorthand."""
    text = text.strip()
    if text.startswith("{"):
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterDomainError(f"bad distribution JSON: {exc}") from None
    else:
        family, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, sep, val = item.partition("=")
            if not sep:
                raise ParameterDomainError(f"bad distribution parameter {item!r}; expected key=value")
            params[key.strip()] = _number(val.strip())
        spec = {"family": family.strip(), "params": params}
    from_spec(spec)  # validate now
    return spec


def _parse_regime(text):
    regime, _, rest = text.partition(":")
    out = {"regime": regime}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        out[key.strip()] = float(val)
    return out


def read_data(path):
    """One-column numeric CSV (an optional header line is skipped)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterDomainError(f"cannot read data file: {exc}") from None
    lines = [ln.split(",")[0].strip() for ln in text.splitlines() if ln.strip()]
    if lines:
        try:
            float(lines[0])
        except ValueError:
            lines = lines[1:]
    try:
        return np.array([float(v) for v in lines])
    except ValueError as exc:
        raise ParameterDomainError(f"non-numeric value in data file: {exc}") from None


def _emit(obj, args):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if getattr(args, "output_dir", None):
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.json").write_text(text)
    sys.stdout.write(text)


def _gamma(args, n):
    if getattr(args, "gamma", None) is not None:
        return float(args.gamma)
    if getattr(args, "b", None) is not None:
        return n * float(args.b)
    raise ParameterDomainError("give --b or --gamma")


# ---------------------------------------------------------------------------
# direct subcommands


def cmd_estimate(args):
    if (args.dist is None) == (args.data is None):
        raise ParameterDomainError("give exactly one of --dist or --data")
    dist = EmpiricalDistribution(read_data(args.data)) if args.data else from_spec(parse_dist(args.dist))
    gamma = _gamma(args, args.n)
    res = estimate(dist, args.n, gamma, args.reps, args.seed, method=args.method, workers=args.workers)
    out = {"n": args.n, "gamma": gamma, "b": gamma / args.n, "distribution": repr(dist), **res.to_dict()}
    if args.data:
        # conditional MC on a discrete input carries a tie bias bounded by this factor times p
        out["bias_bound_factor"] = cond_mc_bias_bound(args.n, dist.size)
        out["N"] = dist.size
    _emit(out, args)


def cmd_asymptotic(args):
    dist = from_spec(parse_dist(args.dist))
    n = args.n
    if args.target_p is not None:
        b = solve_level(dist, n, args.target_p, inequality=args.inequality)
    elif args.b is not None:
        b = args.b
    else:
        b = _gamma(args, n) / n
    out = {"distribution": repr(dist), "n": n, "b": b, "gamma": n * b, "heavy_tailed": dist.heavy_tailed}
    if dist.heavy_tailed:
        out["asymptotic"] = heavy_asymptotic(dist, n, n * b)
        out["regime"] = "heavy"
    else:
        sol = solve_tilt(dist, b)
        out["tilt"] = sol.to_dict()
        out["asymptotic"] = light_asymptotic(dist, n, b, args.inequality, span=args.span, solution=sol)
        out["regime"] = "light"
    try:
        out["reliable_u"] = reliable_truncation_level(dist, n, b)
    except RareTailError as exc:
        out["reliable_u"] = None
        out["reliable_u_error"] = exc.code
    out["unreliable_u"] = unreliable_truncation_level(n, b, dist.mean())
    out["note"] = "truncation levels are order-of-magnitude guidance"
    _emit(out, args)


# ---------------------------------------------------------------------------
# study subcommands


def _config_file(path):
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _study_config(args, kind, **fields):
    data = _config_file(args.config)
    data["kind"] = kind
    for key, value in fields.items():
        if value is not None:
            data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    if args.output_dir is not None:
        data["output_dir"] = args.output_dir
    return load_config(data)


def _run_report(cfg, args):
    report = run_experiment(cfg, workers=args.workers)
    outdir = cfg.output_dir
    if outdir:
        files = report.write(outdir, plots=cfg.emit_plots)
        sys.stdout.write(json.dumps({"kind": report.kind, "files": [str(f) for f in files]}, indent=2) + "\n")
    else:
        sys.stdout.write(report.to_json())
    return report


def _dists(args):
    return [{"family": s["family"], "params": s["params"]} for s in map(parse_dist, args.dist)] if args.dist else None


def _merge_budgets(args):
    b = {}
    for name in ("estimator_reps", "oracle_reps", "inner_reps", "bootstrap_B"):
        v = getattr(args, name, None)
        if v is not None:
            b[name] = v
    if not b:
        return None
    return {**_config_file(args.config).get("budgets", {}), **b}


def _targets(args):
    return {"target_p": args.target_p, "b": args.b, "gamma": args.gamma}


def cmd_thresholds(args):
    regimes = [_parse_regime(r) for r in args.regime] if args.regime else None
    cfg = _study_config(args, "thresholds", regimes=regimes, n=args.n, b=args.b, target_p=args.target_p)
    _run_report(cfg, args)


def cmd_truncation(args):
    cfg = _study_config(
        args, "truncation_study", distributions=_dists(args), n=args.n, **_targets(args),
        truncation_quantile=args.truncation_quantile, estimator=args.method, budgets=_merge_budgets(args),
    )
    _run_report(cfg, args)


def cmd_empirical(args):
    cfg = _study_config(
        args, "empirical_study", distributions=_dists(args), n=args.n, **_targets(args),
        data_sizes=args.data_sizes, replications=args.replications, estimator=args.method,
        budgets=_merge_budgets(args),
    )
    _run_report(cfg, args)


def cmd_bootstrap(args):
    if args.data:
        x = read_data(args.data)
        n = args.n[0] if args.n else 10
        gamma = _gamma(argparse.Namespace(gamma=(args.gamma or [None])[0], b=(args.b or [None])[0]), n)
        inner = InnerEstimator(args.method or "auto", args.inner_reps or 10**5)
        B = args.bootstrap_B or 100
        seed = 0 if args.seed is None else args.seed
        if args.fit_method:
            tq = (args.tail_quantiles or [0.01])[0]
            ci = gpd_bootstrap_ci(x, B, n, gamma, tq, args.fit_method[0], inner, args.level or 0.95, seed,
                                  workers=args.workers)
        else:
            ci = nonparam_bootstrap_ci(x, B, n, gamma, inner, args.level or 0.95, seed, workers=args.workers)
        out = {"n": n, "gamma": gamma, "N": int(x.size), "B": B, "seed": seed, "inner_method": inner.method,
               "inner_reps": inner.replications, **ci.to_dict()}
        _emit(out, args)
        return
    kind = "gpd_bootstrap_coverage" if args.fit_method or args.gpd else "bootstrap_coverage"
    cfg = _study_config(
        args, kind, distributions=_dists(args), n=args.n, **_targets(args), data_sizes=args.data_sizes,
        replications=args.replications, estimator=args.method, budgets=_merge_budgets(args), level=args.level,
        tail_quantiles=args.tail_quantiles, fit_methods=args.fit_method, true_p=args.true_p,
    )
    _run_report(cfg, args)


def cmd_evt(args):
    k_window = tuple(args.k_window) if args.k_window else None
    if args.data:
        x = read_data(args.data)
        N = x.size
        out = {"N": int(N), "margin": args.margin, "k_window": list(k_window or default_window(N)), "verdicts": {}}
        files = {}
        for est in args.estimators or ["pickands", "moment"]:
            det = HeavyTailDetector(est, k_window, args.margin)
            try:
                det.fit(x)
                out["verdicts"][est] = {"verdict": str(det.verdict_), "heavy_fraction": det.heavy_fraction_,
                                        "n_defined": det.n_defined_}
                s = det.series_
            except RareTailError as exc:
                out["verdicts"][est] = {"error": exc.code, "message": str(exc)}
                s = (moment_series if est == "moment" else pickands_series)(x)
            files[f"series_{est}.csv"] = s.to_csv()
            files[f"series_{est}.svg"] = line_plot_svg(
                [(est, s.k.tolist(), [float(v) for v in s.xi_hat])], title=f"{est} estimator", xlabel="k",
                ylabel="xi_hat", reference=0.0)
        verdicts = {v["verdict"] for v in out["verdicts"].values() if "verdict" in v}
        out["estimators_disagree"] = len(verdicts) > 1
        if args.output_dir:
            outdir = Path(args.output_dir)
            outdir.mkdir(parents=True, exist_ok=True)
            for name, text in sorted(files.items()):
                (outdir / name).write_text(text)
        _emit(out, args)
        return
    cfg = _study_config(
        args, "evt_detection", distributions=_dists(args), data_sizes=args.data_sizes,
        estimators=args.estimators, k_window=list(k_window) if k_window else None, margin=args.margin,
    )
    _run_report(cfg, args)


def cmd_experiment(args):
    if args.action != "run":
        raise ParameterDomainError(f"unknown experiment action {args.action!r}")
    cfg = load_config(args.config_file, seed=args.seed, output_dir=args.output_dir)
    _run_report(cfg, args)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides the config seed)")
    common.add_argument("--workers", type=int, help="worker threads (default: RARETAIL_WORKERS or 1)")
    common.add_argument("--output-dir", help="write JSON/CSV/SVG files here instead of printing")

    p = argparse.ArgumentParser(prog="raretail", description="Rare-event probabilities for i.i.d. sums.")
    p.add_argument("--version", action="version", version=f"raretail {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", parents=[common], help="Monte Carlo estimate of P(S_n > gamma)")
    e.add_argument("--dist")
    e.add_argument("--data", help="one-column CSV; the empirical law of the data is the input")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--b", type=float)
    e.add_argument("--gamma", type=float)
    e.add_argument("--reps", type=int, default=10**6)
    e.add_argument("--method", default="auto", choices=["auto", "crude", "cond_mc_ak", "is_tilted"])
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("asymptotic", parents=[common], help="tilt root, asymptotic tail and truncation levels")
    a.add_argument("--dist", required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--b", type=float)
    a.add_argument("--gamma", type=float)
    a.add_argument("--target-p", type=float)
    a.add_argument("--inequality", default="strict", choices=["strict", "nonstrict"])
    a.add_argument("--span", type=float)
    a.set_defaults(func=cmd_asymptotic)

    def study(name, func, helptext):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--config", help="JSON config; flags replace its keys")
        s.add_argument("--dist", action="append", help="distribution spec (repeatable)")
        s.add_argument("--n", type=int, nargs="+")
        s.add_argument("--b", type=float, nargs="+")
        s.add_argument("--gamma", type=float, nargs="+")
        s.add_argument("--target-p", type=float, nargs="+")
        s.add_argument("--method", choices=["auto", "crude", "cond_mc_ak", "is_tilted"])
        s.add_argument("--estimator-reps", type=int)
        s.add_argument("--oracle-reps", type=int)
        s.set_defaults(func=func)
        return s

    t = sub.add_parser("thresholds", parents=[common], help="reliable truncation levels and minimum data sizes")
    t.add_argument("--config")
    t.add_argument("--regime", action="append", help="e.g. heavy:alpha=2.5  exponential:lam=1  normal:sigma2=1")
    t.add_argument("--n", type=int, nargs="+")
    t.add_argument("--b", type=float, nargs="+")
    t.add_argument("--target-p", type=float, nargs="+")
    t.set_defaults(func=cmd_thresholds)

    tr = study("truncation-study", cmd_truncation, "error of truncating the input at a tail quantile")
    tr.add_argument("--truncation-quantile", type=float)

    em = study("empirical-study", cmd_empirical, "error of estimating with empirical inputs")
    em.add_argument("--data-sizes", type=int, nargs="+")
    em.add_argument("--replications", type=int)

    bo = study("bootstrap", cmd_bootstrap, "percentile bootstrap CI or coverage study")
    bo.add_argument("--data", help="one-column CSV: compute one CI for this sample")
    bo.add_argument("--data-sizes", type=int, nargs="+")
    bo.add_argument("--replications", type=int)
    bo.add_argument("--inner-reps", type=int)
    bo.add_argument("--bootstrap-B", type=int)
    bo.add_argument("--level", type=float)
    bo.add_argument("--gpd", action="store_true", help="GPD-spliced resamples")
    bo.add_argument("--tail-quantiles", type=float, nargs="+")
    bo.add_argument("--fit-method", nargs="+", choices=["mle", "mom", "pwm"])
    bo.add_argument("--true-p", type=float)

    ev = sub.add_parser("evt", parents=[common], help="extreme value index series and heavy-tail verdicts")
    ev.add_argument("--config")
    ev.add_argument("--data", help="one-column CSV: analyse this sample")
    ev.add_argument("--dist", action="append")
    ev.add_argument("--data-sizes", type=int, nargs="+")
    ev.add_argument("--estimators", nargs="+", choices=["pickands", "moment"])
    ev.add_argument("--k-window", type=int, nargs=2)
    ev.add_argument("--margin", type=float, default=0.05)
    ev.set_defaults(func=cmd_evt)

    ex = sub.add_parser("experiment", parents=[common], help="run a config-driven experiment")
    ex.add_argument("action", choices=["run"])
    ex.add_argument("config_file")
    ex.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (RareTailError, ArithmeticError, MemoryError, OSError, ValueError) as exc:
        code = getattr(exc, "code", "invalid_value" if isinstance(exc, ValueError) else type(exc).__name__)
        msg = {"error": code, "message": str(exc)}
        sys.stderr.write(json.dumps(msg) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
