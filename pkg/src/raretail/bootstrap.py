"""Percentile bootstrap intervals for P(S_n > gamma) and coverage studies.

Two resampling schemes:

- nonparametric: each resample's empirical law drives the estimator
- GPD-spliced: each resample keeps its empirical body and replaces the tail
  above the (1 - q) quantile by a fitted generalized Pareto law

A resample whose inner estimate fails is skipped and counted. More than
``MAX_FAILURE_FRACTION`` failures abort the interval.

Every resample ``i`` (and every replication ``r`` of a coverage study)
gets its own child stream derived from the master seed and its index, so
the output does not depend on scheduling.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_count, check_probability, check_sample, worker_count
from .distributions import EmpiricalDistribution, splice
from .estimators import _resolve_seed, estimate
from .evt import gpd_fit
from .exceptions import BootstrapFailureError, ParameterDomainError, RareTailError

__all__ = [
    "InnerEstimator",
    "ConfidenceInterval",
    "CoverageReport",
    "percentile_bounds",
    "nonparam_bootstrap_ci",
    "gpd_bootstrap_ci",
    "coverage_study",
    "MAX_FAILURE_FRACTION",
]

MAX_FAILURE_FRACTION = 0.2


@dataclass(frozen=True)
class InnerEstimator:
    """Estimator run on each resample: method name and replication budget."""

    method: str = "auto"
    replications: int = 10**5

    def __post_init__(self):
        check_count(self.replications, "replications")
        if self.method not in ("auto", "crude", "cond_mc_ak", "is_tilted"):
            raise ParameterDomainError(f"unknown inner estimator {self.method!r}")

    def __call__(self, dist, n, gamma, seed):
        return estimate(dist, n, gamma, self.replications, seed, method=self.method, workers=1).estimate


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    resample_estimates: np.ndarray = field(repr=False)
    method: str = "nonparametric"
    n_failed: int = 0
    details: dict = field(default_factory=dict, compare=False)

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, value):
        return self.lower <= value <= self.upper

    def to_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "method": self.method,
            "n_failed": self.n_failed,
            "resample_estimates": [float(v) for v in self.resample_estimates],
            **self.details,
        }


def percentile_bounds(estimates, level):
    """Order statistics at ceil(B a/2) and ceil(B (1 - a/2)) (1-indexed), a = 1 - level.

    Positions are clamped to [1, B].
    """
    est = np.sort(np.asarray(estimates, dtype=float))
    B = est.size
    if B == 0:
        raise ParameterDomainError("no resample estimates")
    a = 1.0 - check_probability(level, "level")
    # round before ceil so that e.g. 100 * 0.025 is not pushed up by float noise
    lo = math.ceil(round(B * a / 2.0, 9))
    hi = math.ceil(round(B * (1.0 - a / 2.0), 9))
    lo = min(max(lo, 1), B)
    hi = min(max(hi, 1), B)
    return float(est[lo - 1]), float(est[hi - 1])


def _child_seed(seed, *index):
    if isinstance(seed, tuple):
        return seed + tuple(index)
    return (seed,) + tuple(index)


def _map(fn, items, workers):
    w = worker_count(workers)
    if w > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=w) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _bootstrap(data, B, n, gamma, level, seed, build, inner, method, workers, details):
    B = check_count(B, "B", minimum=2)
    n = check_count(n, "n")
    check_probability(level, "level")
    x = check_sample(data)
    seed = _resolve_seed(seed)

    def one(i):
        rng = np.random.default_rng(np.random.SeedSequence(_child_seed(seed, 0, i)))
        resample = x[rng.integers(0, x.size, x.size)]
        try:
            dist = build(resample)
            return float(inner(dist, n, gamma, _child_seed(seed, 1, i)))
        except (RareTailError, ArithmeticError, ValueError):
            return None

    values = _map(one, list(range(B)), workers)
    ok = np.array([v for v in values if v is not None], dtype=float)
    n_failed = B - ok.size
    if n_failed > MAX_FAILURE_FRACTION * B:
        raise BootstrapFailureError(f"{n_failed} of {B} resamples failed", n_failed=n_failed, n_total=B)
    lo, hi = percentile_bounds(ok, level)
    return ConfidenceInterval(lo, hi, level, ok, method, n_failed, details)


def nonparam_bootstrap_ci(data, B, n, gamma, inner=None, level=0.95, seed=None, *, workers=None):
    """Percentile CI from B with-replacement resamples, each used as the input law."""
    inner = inner or InnerEstimator()
    return _bootstrap(
        data, B, n, gamma, level, seed, EmpiricalDistribution, inner, "nonparametric", workers, {}
    )


def gpd_bootstrap_ci(
    data, B, n, gamma, tail_q=0.01, fit_method="mle", inner=None, level=0.95, seed=None, *, workers=None
):
    """Percentile CI where each resample's tail above its (1 - tail_q) quantile is a fitted GPD."""
    if not 0 < tail_q < 0.5:
        raise ParameterDomainError("tail_q must lie in (0, 0.5)")
    inner = inner or InnerEstimator()

    def build(resample):
        body = EmpiricalDistribution(resample)
        t = float(body.quantile(1.0 - tail_q))
        exc = resample[resample > t] - t
        return splice(body, tail_q, gpd_fit(exc, fit_method, t))

    method = f"gpd_spliced({fit_method},{tail_q})"
    details = {"fit_method": fit_method, "tail_quantile": tail_q}
    return _bootstrap(data, B, n, gamma, level, seed, build, inner, method, workers, details)


@dataclass
class CoverageReport:
    replications: int
    coverage: float
    mean_width: float
    width_over_p: list
    true_p: float
    covered: list
    n_failed_total: int = 0
    n_aborted: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self):
        """Row in the (Tail Qtl, Method, sample size, Coverage, CI Width) layout."""
        c = self.config
        return {
            "Tail Qtl": c.get("tail_quantile", ""),
            "Method": c.get("fit_method", c.get("method", "nonparametric")),
            "sample size": c.get("N", ""),
            "Coverage": self.coverage,
            "CI Width": self.mean_width,
        }

    @staticmethod
    def csv_text(reports):
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["Tail Qtl", "Method", "sample size", "Coverage", "CI Width"], lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.csv_row())
        return buf.getvalue()


def coverage_study(truth, true_p, N, reps, ci_method, seed=None, *, config=None, workers=None):
    """Fraction of replications whose CI covers ``true_p``.

    Each replication draws N observations from ``truth`` and calls
    ``ci_method(data, seed)``, which returns a :class:`ConfidenceInterval`
    (or any object with ``lower`` and ``upper``). A replication whose CI
    raises :class:`BootstrapFailureError` counts as not covering.
    """
    reps = check_count(reps, "reps", minimum=10)
    N = check_count(N, "N")
    seed = _resolve_seed(seed)

    def one(r):
        rng = np.random.default_rng(np.random.SeedSequence(_child_seed(seed, 2, r)))
        data = truth.sample(rng, N)
        try:
            return ci_method(data, _child_seed(seed, 3, r))
        except BootstrapFailureError:
            return None

    cis = _map(one, list(range(reps)), workers)
    covered, widths = [], []
    failed = 0
    for ci in cis:
        if ci is None:
            covered.append(False)
            continue
        covered.append(bool(ci.lower <= true_p <= ci.upper))
        widths.append(ci.upper - ci.lower)
        failed += getattr(ci, "n_failed", 0)
    cfg = dict(config or {})
    cfg.setdefault("N", N)
    return CoverageReport(
        replications=reps,
        coverage=float(np.mean(covered)),
        mean_width=float(np.mean(widths)) if widths else float("nan"),
        width_over_p=[w / true_p if true_p else float("nan") for w in widths],
        true_p=float(true_p),
        covered=covered,
        n_failed_total=failed,
        n_aborted=sum(ci is None for ci in cis),
        config=cfg,
    )
