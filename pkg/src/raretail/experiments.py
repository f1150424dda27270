"""Desk-scale experiment runners driven by :class:`ExperimentConfig`.

Each runner returns a :class:`Report`: one row per cell (a point of the
configured grid), the full config, the master seed, the package version and
the Monte Carlo budgets. A cell's random streams are derived from the master
seed and a hash of the cell's coordinates, so any cell can be re-run on its
own and scheduling order never changes the results.
"""

import csv
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import worker_count
from .asymptotics import reliable_truncation_level, solve_level
from .bootstrap import InnerEstimator, coverage_study, gpd_bootstrap_ci, nonparam_bootstrap_ci
from .distributions import EmpiricalDistribution, truncate
from .estimators import cond_mc_bias_bound, estimate, exact_tail
from .evt import HeavyTailDetector, TailClass, default_window, moment_series, pickands_series
from .exceptions import RareTailError, UnsupportedClassError
from .plots import bar_plot_svg, box_plot_svg, box_stats, line_plot_svg

__all__ = [
    "Report",
    "run_experiment",
    "run_truncation_study",
    "run_empirical_study",
    "run_bootstrap_coverage",
    "run_gpd_bootstrap_coverage",
    "run_evt_detection",
    "run_thresholds",
    "emit_plots",
    "cell_seed",
    "true_probability",
]


@dataclass
class Report:
    kind: str
    config: dict
    rows: list
    columns: list
    extra: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)  # file name -> text

    @property
    def seed(self):
        return self.config.get("seed")

    def to_dict(self):
        return {
            "kind": self.kind,
            "version": __version__,
            "seed": self.seed,
            "budgets": self.config.get("budgets"),
            "config": self.config,
            "cells": self.rows,
            **self.extra,
        }

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, self.columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _fmt(r.get(k)) for k in self.columns})
        return buf.getvalue()

    def write(self, outdir, plots=True):
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        files = [out / f"{self.kind}.json", out / f"{self.kind}.csv"]
        files[0].write_text(self.to_json())
        files[1].write_text(self.to_csv())
        for name, text in sorted(self.artifacts.items()):
            (out / name).write_text(text)
            files.append(out / name)
        if plots:
            files += emit_plots(self, out)
        return files


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(_jsonable(v))
    return "" if v is None else v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def cell_seed(master, *coords):
    """Seed tuple for one cell: the master seed plus a hash of its coordinates."""
    key = "|".join(str(c) for c in coords)
    return (int(master), zlib.crc32(key.encode()))


def _map_cells(fn, cells, workers=None):
    w = worker_count(workers)
    if w > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=w) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def _resolve_targets(cfg, dist, n):
    """(target_p, b, gamma) triples for one (distribution, n)."""
    kind, values = cfg.targets()
    out = []
    for v in values:
        if kind == "target_p":
            b = solve_level(dist, n, v)
            out.append((v, b, n * b))
        elif kind == "b":
            out.append((None, v, n * v))
        else:
            out.append((None, v / n, v))
    return out


def true_probability(dist, n, gamma, reps, seed, method="auto"):
    """Exact tail where the sum law is known, otherwise a variance-reduced oracle run."""
    try:
        return exact_tail(dist, n, gamma), 0.0, "exact"
    except UnsupportedClassError:
        res = estimate(dist, n, gamma, reps, seed, method=method)
        return res.estimate, res.std_error, res.estimator


def _failed(row, exc):
    row["status"] = f"failed:{getattr(exc, 'code', type(exc).__name__)}"
    row["message"] = str(exc)
    return row


# ---------------------------------------------------------------------------
# truncation study


def run_truncation_study(cfg, workers=None):
    """Relative error |p - p_u|/p of truncating the input at its (1 - q) quantile."""
    R = cfg.budgets.estimator_reps
    q = cfg.truncation_quantile
    cells = [(d, n) for d in cfg.distributions for n in cfg.n]

    def run(cell):
        spec, n = cell
        dist = spec.build()
        rows = []
        for target_p, b, gamma in _resolve_targets(cfg, dist, n):
            seed = cell_seed(cfg.seed, "truncation", spec.name, n, gamma)
            row = {"distribution": spec.name, "n": n, "target_p": target_p, "b": b, "gamma": gamma,
                   "truncation_quantile": q, "seed": list(seed), "replications": R}
            try:
                u = float(dist.isf(q)) if q > 0 else math.inf
                p = estimate(dist, n, gamma, R, seed + (0,), method=cfg.estimator)
                pu = estimate(truncate(dist, u), n, gamma, R, seed + (1,), method=cfg.estimator)
                rel = abs(p.estimate - pu.estimate) / p.estimate
                se = math.hypot(pu.std_error / p.estimate, pu.estimate * p.std_error / p.estimate**2)
                row.update(u=u, p=p.estimate, p_se=p.std_error, p_estimator=p.estimator,
                           p_u=pu.estimate, p_u_se=pu.std_error, p_u_estimator=pu.estimator,
                           rel_error=rel, rel_error_se=se, status="ok")
            except (RareTailError, ArithmeticError) as exc:
                _failed(row, exc)
            rows.append(row)
        return rows

    rows = [r for rs in _map_cells(run, cells, workers) for r in rs]
    cols = ["distribution", "n", "target_p", "b", "gamma", "truncation_quantile", "u", "p", "p_se",
            "p_estimator", "p_u", "p_u_se", "p_u_estimator", "rel_error", "rel_error_se", "replications",
            "seed", "status"]
    return Report("truncation_study", cfg.to_dict(), rows, cols)


# ---------------------------------------------------------------------------
# empirical-input study


def run_empirical_study(cfg, workers=None):
    """Relative errors (p_hat - p)/p of estimates driven by empirical inputs of size N."""
    cells = [(d, n, N) for d in cfg.distributions for n in cfg.n for N in cfg.data_sizes]
    R = cfg.budgets.estimator_reps

    def run(cell):
        spec, n, N = cell
        dist = spec.build()
        rows = []
        for target_p, b, gamma in _resolve_targets(cfg, dist, n):
            seed = cell_seed(cfg.seed, "empirical", spec.name, n, N, gamma)
            row = {"distribution": spec.name, "n": n, "N": N, "target_p": target_p, "b": b, "gamma": gamma,
                   "seed": list(seed), "replications": cfg.replications, "estimator_reps": R}
            try:
                p, p_se, how = true_probability(dist, n, gamma, cfg.budgets.oracle_reps, seed + (0,))
                rel, used = [], set()
                for r in range(cfg.replications):
                    rng = np.random.default_rng(np.random.SeedSequence(seed + (1, r)))
                    emp = EmpiricalDistribution(dist.sample(rng, N))
                    est = estimate(emp, n, gamma, R, seed + (2, r), method=cfg.estimator)
                    used.add(est.estimator)
                    rel.append((est.estimate - p) / p)
                bs = box_stats(rel)
                row.update(p=p, p_se=p_se, p_source=how, estimators=sorted(used),
                           bias_bound=cond_mc_bias_bound(n, N) if "cond_mc_ak" in used else None,
                           rel_errors=rel, **bs.to_dict(), box_covers_zero=bs.covers(0.0), status="ok")
            except (RareTailError, ArithmeticError) as exc:
                _failed(row, exc)
            rows.append(row)
        return rows

    rows = [r for rs in _map_cells(run, cells, workers) for r in rs]
    cols = ["distribution", "n", "N", "target_p", "b", "gamma", "p", "p_source", "estimators", "median",
            "q25", "q75", "whisker_low", "whisker_high", "box_covers_zero", "bias_bound", "replications",
            "estimator_reps", "seed", "status"]
    return Report("empirical_study", cfg.to_dict(), rows, cols)


# ---------------------------------------------------------------------------
# bootstrap coverage


def _coverage(cfg, workers, gpd):
    inner = InnerEstimator(cfg.estimator, cfg.budgets.inner_reps)
    B = cfg.budgets.bootstrap_B
    variants = [(q, m) for q in cfg.tail_quantiles for m in cfg.fit_methods] if gpd else [(None, None)]
    cells = [(d, n, N, v) for d in cfg.distributions for n in cfg.n for N in cfg.data_sizes for v in variants]

    def run(cell):
        spec, n, N, (tq, fm) = cell
        dist = spec.build()
        rows = []
        for target_p, b, gamma in _resolve_targets(cfg, dist, n):
            seed = cell_seed(cfg.seed, "bootstrap", spec.name, n, N, gamma, tq, fm)
            row = {"distribution": spec.name, "n": n, "N": N, "target_p": target_p, "b": b, "gamma": gamma,
                   "tail_quantile": tq, "fit_method": fm or "nonparametric", "B": B, "level": cfg.level,
                   "inner_reps": inner.replications, "inner_method": inner.method,
                   "replications": cfg.replications, "seed": list(seed)}
            try:
                if cfg.true_p is not None:
                    p, how = cfg.true_p, "config"
                else:
                    p, _, how = true_probability(dist, n, gamma, cfg.budgets.oracle_reps, seed + (0,))
                if gpd:
                    def ci(data, s):
                        return gpd_bootstrap_ci(data, B, n, gamma, tq, fm, inner, cfg.level, s, workers=1)
                else:
                    def ci(data, s):
                        return nonparam_bootstrap_ci(data, B, n, gamma, inner, cfg.level, s, workers=1)
                rep = coverage_study(dist, p, N, cfg.replications, ci, seed + (1,), workers=1,
                                     config={"tail_quantile": tq or "", "fit_method": fm or "nonparametric"})
                row.update(true_p=p, true_p_source=how, coverage=rep.coverage, mean_width=rep.mean_width,
                           median_width_over_p=float(np.median(rep.width_over_p)) if rep.width_over_p else None,
                           width_over_p=rep.width_over_p, n_failed=rep.n_failed_total, n_aborted=rep.n_aborted,
                           status="ok")
            except (RareTailError, ArithmeticError) as exc:
                _failed(row, exc)
            rows.append(row)
        return rows

    rows = [r for rs in _map_cells(run, cells, workers) for r in rs]
    cols = ["distribution", "n", "N", "target_p", "b", "gamma", "tail_quantile", "fit_method", "true_p",
            "true_p_source", "coverage", "mean_width", "median_width_over_p", "n_failed", "n_aborted", "B",
            "level", "inner_method", "inner_reps", "replications", "seed", "status"]
    table = io.StringIO()
    w = csv.writer(table, lineterminator="\n")
    w.writerow(["Tail Qtl", "Method", "sample size", "Coverage", "CI Width"])
    for r in rows:
        if r.get("status") == "ok":
            w.writerow([r["tail_quantile"] if r["tail_quantile"] is not None else "", r["fit_method"], r["N"],
                        repr(r["coverage"]), repr(r["mean_width"])])
    kind = "gpd_bootstrap_coverage" if gpd else "bootstrap_coverage"
    return Report(kind, cfg.to_dict(), rows, cols, artifacts={f"{kind}_table.csv": table.getvalue()})


def run_bootstrap_coverage(cfg, workers=None):
    """Coverage and width of nonparametric percentile bootstrap CIs."""
    return _coverage(cfg, workers, gpd=False)


def run_gpd_bootstrap_coverage(cfg, workers=None):
    """Coverage and width of GPD-spliced bootstrap CIs over tail quantiles and fit methods."""
    return _coverage(cfg, workers, gpd=True)


# ---------------------------------------------------------------------------
# heavy-tail detection


def run_evt_detection(cfg, workers=None):
    """Pickands and moment series per distribution and N, with tail verdicts."""
    cells = [(d, N) for d in cfg.distributions for N in cfg.data_sizes]

    def run(cell):
        spec, N = cell
        dist = spec.build()
        seed = cell_seed(cfg.seed, "evt", spec.name, N)
        data = dist.sample(np.random.default_rng(np.random.SeedSequence(seed)), N)
        lo, hi = cfg.k_window or default_window(N)
        rows, series = [], {}
        verdicts = {}
        for est in cfg.estimators:
            row = {"distribution": spec.name, "N": N, "estimator": est, "k_low": lo, "k_high": hi,
                   "margin": cfg.margin, "seed": list(seed)}
            kmax = hi if est == "moment" else min(hi, N // 4)
            ks = np.arange(1, max(kmax, 1) + 1)
            s = moment_series(data, ks) if est == "moment" else pickands_series(data, ks)
            series[est] = s
            try:
                det = HeavyTailDetector(est, (lo, hi), cfg.margin).fit(data)
                sel = (s.k >= lo) & (s.k <= hi) & s.defined
                window = s.xi_hat[sel]
                row.update(verdict=str(det.verdict_), heavy_fraction=det.heavy_fraction_,
                           n_defined=det.n_defined_, median_xi=float(np.median(window)),
                           frac_in_0p2_0p4=float(np.mean((window >= 0.2) & (window <= 0.4))), status="ok")
                verdicts[est] = det.verdict_
            except RareTailError as exc:
                _failed(row, exc)
            rows.append(row)
        disagree = len(set(verdicts.values())) > 1
        for row in rows:
            row["estimators_disagree"] = disagree
        return rows, series

    results = _map_cells(run, cells, workers)
    rows = [r for rs, _ in results for r in rs]
    artifacts = {}
    for (spec, N), (_, series) in zip(cells, results):
        for est, s in series.items():
            artifacts[f"series_{_slug(spec.name)}_N{N}_{est}.csv"] = s.to_csv()
    cols = ["distribution", "N", "estimator", "verdict", "heavy_fraction", "n_defined", "median_xi",
            "frac_in_0p2_0p4", "estimators_disagree", "k_low", "k_high", "margin", "seed", "status"]
    rep = Report("evt_detection", cfg.to_dict(), rows, cols, artifacts=artifacts)
    rep.extra["series"] = {
        f"{spec.name}|{N}|{est}": {"k": s.k.tolist(), "xi_hat": [float(x) for x in s.xi_hat]}
        for (spec, N), (_, series) in zip(cells, results)
        for est, s in series.items()
    }
    return rep


def _slug(name):
    return "".join(ch if ch.isalnum() else "_" for ch in name).strip("_")


# ---------------------------------------------------------------------------
# thresholds


_FORMULAS = {
    "heavy": {"reliable_u": "(n(b-mu))^beta", "order_of_max": "N^(1/alpha)",
              "min_N": "(n(b-mu))^(alpha beta)", "min_N_from_p": "n^beta / p^beta"},
    "exponential": {"reliable_u": "b log n", "order_of_max": "log(N)/lambda",
                    "min_N": "n^(lambda b)", "min_N_from_p": "n^(1 + sqrt(-2 log(p)/n))"},
    "normal": {"reliable_u": "c log n", "order_of_max": "sqrt(2 sigma^2 log N)",
               "min_N": "n^((c^2/(2 sigma^2)) log n)", "min_N_from_p": "n^(-c^2 log(p) log(n) / ((b-mu)^2 n))"},
}


def run_thresholds(cfg, workers=None):
    """Reliable truncation levels and minimum data sizes; closed form, no simulation."""
    rows = []
    bs = cfg.b or [None]
    ps = cfg.target_p or [None]
    for spec in cfg.regimes:
        regime = spec.build()
        for n in cfg.n:
            for b in bs:
                for p in ps:
                    row = {"regime": spec.regime, "alpha": spec.alpha, "beta": spec.beta, "lam": spec.lam,
                           "sigma2": spec.sigma2, "c": spec.c, "mu": spec.mu, "n": n, "b": b, "target_p": p,
                           **{f"formula_{k}": v for k, v in _FORMULAS[spec.regime].items()}}
                    try:
                        if b is not None:
                            row["reliable_u"] = float(regime.reliable_u(n, b, spec.mu)) if n > 1 else None
                            row["min_N"] = regime.min_sample_size(n, b, spec.mu)
                        if p is not None and (spec.regime != "normal" or b is not None):
                            row["min_N_from_p"] = regime.min_sample_size(n, b, spec.mu, p)
                        row["status"] = "ok"
                    except (RareTailError, ArithmeticError, ValueError) as exc:
                        _failed(row, exc)
                    rows.append(row)
    cols = ["regime", "alpha", "beta", "lam", "sigma2", "c", "mu", "n", "b", "target_p", "reliable_u", "min_N",
            "min_N_from_p", "formula_reliable_u", "formula_order_of_max", "formula_min_N", "formula_min_N_from_p",
            "status"]
    return Report("thresholds", cfg.to_dict(), rows, cols,
                  extra={"note": "order-of-magnitude guidance: constants and slowly varying factors are dropped"})


_RUNNERS = {
    "truncation_study": run_truncation_study,
    "empirical_study": run_empirical_study,
    "bootstrap_coverage": run_bootstrap_coverage,
    "gpd_bootstrap_coverage": run_gpd_bootstrap_coverage,
    "evt_detection": run_evt_detection,
    "thresholds": run_thresholds,
}


def run_experiment(cfg, workers=None):
    return _RUNNERS[cfg.kind](cfg, workers)


# ---------------------------------------------------------------------------
# plots


def emit_plots(report, outdir):
    """Write the SVG figures for ``report``; derived only from report data."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    ok = [r for r in report.rows if r.get("status") == "ok"]
    if report.kind == "truncation_study":
        labels = [f"{r['distribution']} n={r['n']}" for r in ok]
        files["truncation_rel_error.svg"] = bar_plot_svg(
            labels, [r["rel_error"] for r in ok], [2 * r["rel_error_se"] for r in ok],
            title="Relative error of truncated input", ylabel="|p - p_u| / p")
    elif report.kind == "empirical_study":
        groups = [(f"{r['distribution']} n={r['n']} N={r['N']}", box_stats(r["rel_errors"])) for r in ok]
        files["empirical_rel_error.svg"] = box_plot_svg(
            groups, title="Relative error with empirical input", ylabel="(p_hat - p) / p", reference=0.0)
    elif report.kind in ("bootstrap_coverage", "gpd_bootstrap_coverage"):
        by = {}
        for r in ok:
            by.setdefault((r["distribution"], r["fit_method"], r["tail_quantile"]), []).append(r)
        series = [(f"{d} {m} {q if q is not None else ''}".strip(), [r["N"] for r in rs], [r["coverage"] for r in rs])
                  for (d, m, q), rs in sorted(by.items(), key=lambda kv: str(kv[0]))]
        files[f"{report.kind}.svg"] = line_plot_svg(
            series, title="Bootstrap CI coverage", xlabel="N", ylabel="coverage", reference=report.config["level"])
        groups = [(f"{r['distribution']} N={r['N']}", box_stats(r["width_over_p"])) for r in ok]
        files[f"{report.kind}_width.svg"] = box_plot_svg(groups, title="CI width / p", ylabel="width / p")
    elif report.kind == "evt_detection":
        for key, s in sorted(report.extra.get("series", {}).items()):
            name, N, est = key.split("|")
            files[f"series_{_slug(name)}_N{N}_{est}.svg"] = line_plot_svg(
                [(est, s["k"], [float(x) for x in s["xi_hat"]])], title=f"{est}: {name}, N={N}",
                xlabel="k", ylabel="xi_hat", reference=0.0)
    written = []
    for name, text in sorted(files.items()):
        path = out / name
        path.write_text(text)
        written.append(path)
    return written
