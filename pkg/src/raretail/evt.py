"""Extreme value tools: GPD fitting of excesses and extreme value index series.

``gpd_fit`` fits the two-parameter generalized Pareto law

    sf(y) = (1 + xi y / sigma)^(-1/xi),  y >= 0

to threshold excesses by method of moments, probability-weighted moments
or maximum likelihood. ``pickands_series`` and ``moment_series`` estimate
the extreme value index over a range of k (the number of top order
statistics used), and ``classify_tail`` turns a series into a heavy-tail
verdict.
"""

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator

from . import _gpd
from ._validation import check_sample
from .exceptions import (
    ConvergenceError,
    DegenerateDataError,
    InconclusiveError,
    InsufficientTailDataError,
    ParameterDomainError,
)

__all__ = [
    "GpdFit",
    "gpd_fit",
    "gpd_loglik",
    "mom_from_moments",
    "pwm_from_moments",
    "IndexSeries",
    "pickands_series",
    "moment_series",
    "TailClass",
    "classify_tail",
    "heavy_fraction",
    "default_window",
    "GPDTailEstimator",
    "HeavyTailDetector",
    "MIN_EXCESSES",
    "DEFAULT_MARGIN",
]

MIN_EXCESSES = 10
MIN_DEFINED = 10
DEFAULT_MARGIN = 0.05
MLE_XI_RANGE = (-0.9, 5.0)
METHODS = ("mle", "mom", "pwm")


@dataclass(frozen=True)
class GpdFit:
    shape: float
    scale: float
    method: str
    n_excesses: int
    threshold: float = 0.0
    loglik: float = float("nan")

    def sf(self, y):
        return _gpd.gpd_sf(y, self.shape, self.scale)

    def isf(self, p):
        return _gpd.gpd_isf(p, self.shape, self.scale)

    def logpdf(self, y):
        return _gpd.gpd_logpdf(y, self.shape, self.scale)

    def to_dict(self):
        return {
            "shape": self.shape,
            "scale": self.scale,
            "method": self.method,
            "n_excesses": self.n_excesses,
            "threshold": self.threshold,
            "loglik": self.loglik,
        }


def gpd_loglik(y, shape, scale):
    """GPD log-likelihood; -inf outside the parameter constraints."""
    if not scale > 0:
        return -np.inf
    return float(np.sum(_gpd.gpd_logpdf(y, shape, scale)))


def mom_from_moments(mean, var):
    """Method-of-moments inversion: (xi, sigma) from the excess mean and variance."""
    r = mean * mean / var
    return 0.5 * (1.0 - r), 0.5 * mean * (r + 1.0)


def pwm_from_moments(a0, a1):
    """PWM inversion with a0 = E[Y] and a1 = E[Y (1 - F(Y))]."""
    d = a0 - 2.0 * a1
    return 2.0 - a0 / d, 2.0 * a0 * a1 / d


def _pwm_a1(ys):
    # ascending order statistics, plotting-position weights (N - i)/(N - 1)
    N = ys.size
    i = np.arange(1, N + 1)
    return float(np.sum(ys * (N - i) / (N - 1)) / N)


def _fit_mle(y, warm):
    """Maximize the likelihood through the profile in tau = xi / sigma.

    For fixed tau the optimal xi is mean(log1p(tau y)), leaving a smooth 1-D
    problem on tau > -1/max(y). Candidates outside the shape range
    ``MLE_XI_RANGE`` are discarded. The search runs on a log-spaced grid
    in s = tau max(y) and refines the best cell with a bounded Brent step.
    """
    N = y.size
    ymax = float(y.max())
    xi_lo, xi_hi = MLE_XI_RANGE

    def xi_of(z):
        s = math.expm1(z)  # tau * ymax, z in R maps onto (-1, inf)
        with np.errstate(divide="ignore"):
            return float(np.mean(np.log1p(s * (y / ymax)))), s / ymax

    def neg_profile(z):
        xi, tau = xi_of(z)
        if not xi_lo <= xi <= xi_hi:
            return np.inf
        if tau == 0 or abs(xi) < 1e-14:
            return N * math.log(float(np.mean(y))) + N
        sigma = xi / tau
        if not sigma > 0:
            return np.inf
        return N * math.log(sigma) + N * (1.0 + xi)

    grid = np.concatenate([np.linspace(-40.0, 40.0, 801), [0.0]])
    vals = np.array([neg_profile(z) for z in grid])
    order = np.argsort(grid)
    grid, vals = grid[order], vals[order]
    if not np.isfinite(vals).any():
        raise ConvergenceError("no feasible point on the profile grid", best=warm)
    j = int(np.argmin(vals))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid.size - 1)]
    best_z, best_v = grid[j], vals[j]
    if hi > lo:
        res = optimize.minimize_scalar(neg_profile, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if res.fun < best_v:
            best_z, best_v = res.x, res.fun
    xi, tau = xi_of(best_z)
    if tau == 0 or abs(xi) < 1e-14:
        return 0.0, float(np.mean(y))
    return xi, xi / tau


def gpd_fit(excesses, method="mle", threshold=0.0):
    """Fit a GPD to positive excesses over ``threshold``.

    MOM uses the sample mean and (unbiased) variance; PWM the plotting-
    position estimate of a1; MLE maximizes the likelihood over the
    feasible set and never returns a point with lower likelihood than the
    PWM estimate it is warm-started from.
    """
    method = str(method).lower()
    if method not in METHODS:
        raise ParameterDomainError(f"unknown GPD fitting method {method!r}")
    y = check_sample(excesses, name="excesses")
    if y.size < MIN_EXCESSES:
        raise InsufficientTailDataError(f"need at least {MIN_EXCESSES} excesses, got {y.size}")
    if np.any(y <= 0):
        raise ParameterDomainError("excesses must be strictly positive")
    mean = float(np.mean(y))
    var = float(np.var(y, ddof=1))
    if not var > 0:
        raise DegenerateDataError("excesses have zero variance")

    if method == "mom":
        xi, sigma = mom_from_moments(mean, var)
    else:
        ys = np.sort(y)
        xi, sigma = pwm_from_moments(mean, _pwm_a1(ys))
        if method == "mle":
            warm = (xi, sigma)
            warm_ll = gpd_loglik(y, *warm)
            cand = _fit_mle(y, warm)
            cand_ll = gpd_loglik(y, *cand)
            if not np.isfinite(cand_ll) and not np.isfinite(warm_ll):
                raise ConvergenceError("likelihood is -inf at both the optimum and the warm start", best=warm)
            xi, sigma = cand if cand_ll >= warm_ll else warm
    if not sigma > 0:
        raise DegenerateDataError(f"{method} produced a non-positive scale")
    return GpdFit(float(xi), float(sigma), method, int(y.size), float(threshold), gpd_loglik(y, xi, sigma))


# ---------------------------------------------------------------------------
# extreme value index series


@dataclass(frozen=True)
class IndexSeries:
    """(k, xi_hat_k) pairs; undefined points carry NaN."""

    estimator: str
    k: np.ndarray
    xi_hat: np.ndarray
    n_samples: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def points(self):
        return list(zip(self.k.tolist(), self.xi_hat.tolist()))

    @property
    def defined(self):
        return np.isfinite(self.xi_hat)

    def __len__(self):
        return self.k.size

    def rows(self):
        return [(self.estimator, int(k), float(x)) for k, x in zip(self.k, self.xi_hat)]

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "k", "xi_hat"])
        for est, k, x in self.rows():
            w.writerow([est, k, repr(x) if math.isfinite(x) else "nan"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text, n_samples=0):
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ParameterDomainError("empty index series")
        est = rows[0]["estimator"]
        k = np.array([int(r["k"]) for r in rows])
        xi = np.array([float(r["xi_hat"]) for r in rows])
        return cls(est, k, xi, n_samples)


def _k_values(k_values, kmax):
    if k_values is None:
        return np.arange(1, kmax + 1)
    k = np.unique(np.asarray(k_values, dtype=int))
    if k.size and k[0] < 1:
        raise ParameterDomainError("k values must be positive")
    return k


def pickands_series(data, k_values=None):
    """Pickands estimates log2((X_(k) - X_(2k)) / (X_(2k) - X_(4k))), descending order statistics.

    ``k_values`` defaults to 1, ..., N // 4. Ties that zero a spacing make
    the point undefined (NaN).
    """
    x = check_sample(data)
    N = x.size
    k = _k_values(k_values, N // 4)
    if k.size and 4 * k[-1] > N:
        raise ParameterDomainError(f"Pickands needs 4k <= N; k={k[-1]}, N={N}")
    xd = np.sort(x)[::-1]
    a, b, c = xd[k - 1], xd[2 * k - 1], xd[4 * k - 1]
    num, den = a - b, b - c
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.log2(num / den)
    xi = np.where((num > 0) & (den > 0), xi, np.nan)
    return IndexSeries("pickands", k, xi, N)


def moment_series(data, k_values=None):
    """Moment (Dekkers-Einmahl-de Haan) estimates of the extreme value index.

    With L_i = log X_(i) over descending order statistics,
    M_r = mean_{i<=k} (L_i - L_{k+1})^r and
    xi_hat = M_1 + 1 - 1/2 (1 - M_1^2/M_2)^(-1).
    k values whose X_(k+1) is not positive are dropped; M_2 = 0 gives NaN.
    """
    x = check_sample(data)
    N = x.size
    k = _k_values(k_values, N - 1)
    if k.size and k[-1] + 1 > N:
        raise ParameterDomainError(f"moment estimator needs k + 1 <= N; k={k[-1]}, N={N}")
    xd = np.sort(x)[::-1]
    kmax = int(k[-1]) if k.size else 0
    top = xd[: kmax + 1]
    npos = int(np.sum(top > 0))
    k = k[k + 1 <= npos]  # X_(k+1) must be positive
    if k.size == 0:
        return IndexSeries("moment", k, np.array([]), N)
    pos = top[:npos]
    # log-ratios to the sample maximum: exactly invariant to rescaling the data
    d = np.log(pos / pos[0])
    c1 = np.concatenate([[0.0], np.cumsum(d)])
    c2 = np.concatenate([[0.0], np.cumsum(d * d)])
    dk = d[k]
    m1 = c1[k] / k - dk
    m2 = c2[k] / k - 2.0 * dk * c1[k] / k + dk * dk
    m2 = np.maximum(m2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = m1 + 1.0 - 0.5 / (1.0 - m1 * m1 / m2)
    xi = np.where(m2 > 0, xi, np.nan)
    return IndexSeries("moment", k, xi, N)


class TailClass(str, enum.Enum):
    HEAVY_RISK = "HeavyRisk"
    LIGHT_SAFE = "LightSafe"

    def __str__(self):
        return self.value


def default_window(n_samples):
    """Default k window [N/100, N/10]."""
    return (max(1, n_samples // 100), max(1, n_samples // 10))


def heavy_fraction(series, k_window=None, margin=DEFAULT_MARGIN):
    """Fraction of defined estimates in the window above ``margin``, and their count."""
    lo, hi = k_window if k_window is not None else default_window(series.n_samples)
    sel = (series.k >= lo) & (series.k <= hi) & series.defined
    m = int(sel.sum())
    if m == 0:
        return float("nan"), 0
    return float(np.mean(series.xi_hat[sel] > margin)), m


def classify_tail(series, k_window=None, margin=DEFAULT_MARGIN):
    """HeavyRisk iff strictly more than half the defined estimates in the window exceed ``margin``."""
    frac, m = heavy_fraction(series, k_window, margin)
    if m < MIN_DEFINED:
        raise InconclusiveError(f"only {m} defined estimates in the k window; need {MIN_DEFINED}")
    return TailClass.HEAVY_RISK if frac > 0.5 else TailClass.LIGHT_SAFE


# ---------------------------------------------------------------------------
# scikit-learn style wrappers


class GPDTailEstimator(BaseEstimator):
    """Peaks-over-threshold GPD fit with the scikit-learn estimator protocol.

    With ``tail_quantile=None`` the input is taken to be the excesses
    themselves; otherwise the threshold is the empirical (1 - q) quantile
    and only observations above it are used.
    """

    def __init__(self, method="mle", tail_quantile=None):
        self.method = method
        self.tail_quantile = tail_quantile

    def fit(self, X, y=None):
        x = check_sample(X, name="X")
        if self.tail_quantile is None:
            threshold, exc = 0.0, x
        else:
            from .distributions import EmpiricalDistribution

            threshold = float(EmpiricalDistribution(x).quantile(1.0 - self.tail_quantile))
            exc = x[x > threshold] - threshold
        self.fit_ = gpd_fit(exc, self.method, threshold)
        self.shape_ = self.fit_.shape
        self.scale_ = self.fit_.scale
        self.threshold_ = threshold
        self.n_excesses_ = self.fit_.n_excesses
        return self

    def _check_fitted(self):
        if not hasattr(self, "fit_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("call fit before using this estimator")

    def score_samples(self, X):
        """Log-density of the excess law at ``X - threshold``."""
        self._check_fitted()
        x = check_sample(X, name="X")
        return self.fit_.logpdf(x - self.threshold_)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sf(self, X):
        self._check_fitted()
        return self.fit_.sf(np.asarray(X, dtype=float) - self.threshold_)


class HeavyTailDetector(BaseEstimator):
    """Heavy-tail risk detector built on an extreme value index series."""

    def __init__(self, estimator="moment", k_window=None, margin=DEFAULT_MARGIN):
        self.estimator = estimator
        self.k_window = k_window
        self.margin = margin

    def fit(self, X, y=None):
        x = check_sample(X, name="X")
        N = x.size
        lo, hi = self.k_window if self.k_window is not None else default_window(N)
        if self.estimator == "moment":
            ks = np.arange(lo, min(hi, N - 1) + 1)
            self.series_ = moment_series(x, ks)
        elif self.estimator == "pickands":
            ks = np.arange(lo, min(hi, N // 4) + 1)
            self.series_ = pickands_series(x, ks)
        else:
            raise ParameterDomainError(f"unknown index estimator {self.estimator!r}")
        self.heavy_fraction_, self.n_defined_ = heavy_fraction(self.series_, (lo, hi), self.margin)
        self.verdict_ = classify_tail(self.series_, (lo, hi), self.margin)
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).verdict_
