"""Input models for i.i.d. sums.

Every model implements the :class:`Distribution` interface: ``pdf``,
``cdf``, ``sf``, ``quantile``, ``mean``, ``sample`` and, for light tails,
the log-moment generating function ``psi(theta) = log E exp(theta X)`` with
its first two derivatives. Heavy-tailed models raise :class:`NoMgfError` for
``theta > 0``.

Besides the parametric families there are truncated laws (``X`` conditioned
on ``X <= u``), empirical laws built from data, exponential tilts, and
empirical-body / GPD-tail splices.

All objects are immutable after construction. Sampling always takes an
explicit :class:`numpy.random.Generator`.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from . import _gpd
from ._validation import check_positive, check_sample
from .exceptions import (
    EmptyTruncationError,
    InsufficientTailDataError,
    MgfDomainError,
    NoMgfError,
    ParameterDomainError,
)

__all__ = [
    "Distribution",
    "GeneralizedPareto",
    "HalfStudentT",
    "Exponential",
    "Normal",
    "HalfNormal",
    "TruncatedNormal",
    "Weibull",
    "LogNormal",
    "Gamma",
    "DiscreteDistribution",
    "FiniteLattice",
    "EmpiricalDistribution",
    "TruncatedDistribution",
    "TiltedDistribution",
    "SplicedDistribution",
    "make_family",
    "from_spec",
    "truncate",
    "empirical_from",
    "tilt",
    "splice",
    "MIN_TAIL_EXCESSES",
]

MIN_TAIL_EXCESSES = 10

_SQRT2 = math.sqrt(2.0)
_LOG_FLOOR = 60.0  # integrand cut-off, in nats below the peak


def _as_float(x):
    arr = np.asarray(x, dtype=float)
    return arr.item() if arr.ndim == 0 else arr


class Distribution:
    """Common interface; subclasses override what they know in closed form.

    The defaults fall back to quadrature (moments, log-MGF) and bracketed
    root finding (quantiles), so a new family only has to supply ``logpdf``,
    ``cdf``, ``sf`` and ``support``.
    """

    family = "distribution"
    heavy_tailed = False
    continuous = True
    span = None

    # -- basic functions -------------------------------------------------
    @property
    def support(self):
        return (-np.inf, np.inf)

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def isf(self, p):
        """Inverse survival function, accurate for small ``p``."""
        return self.quantile(1.0 - np.asarray(p, dtype=float))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        out = np.vectorize(self._quantile_scalar, otypes=[float])(q)
        return _as_float(out)

    def _quantile_scalar(self, q):
        # bracketed bisection on the cdf
        lo, hi = self.support
        if q <= 0:
            return lo
        if q >= 1:
            return hi
        a = lo if np.isfinite(lo) else -1.0
        b = hi if np.isfinite(hi) else 1.0
        while not np.isfinite(lo) and self.cdf(a) > q:
            a = 2.0 * a - 1.0
        while not np.isfinite(hi) and self.cdf(b) < q:
            b = 2.0 * b + 1.0
        return optimize.brentq(lambda x: self.cdf(x) - q, a, b, xtol=1e-14, rtol=4e-16, maxiter=500)

    def mean(self):
        return self._tilted_moments(0.0)[1]

    def var(self):
        return self._tilted_moments(0.0)[2]

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def max(self):
        return self.support[1]

    # -- log moment generating function -----------------------------------
    @property
    def mgf_domain_sup(self):
        """Supremum of the set where the log-MGF is finite."""
        return 0.0 if self.heavy_tailed else np.inf

    def _check_theta(self, theta):
        sup = self.mgf_domain_sup
        if theta >= sup and not (theta == 0 and sup == 0):
            if self.heavy_tailed and theta > 0:
                raise NoMgfError(f"{self.family} is heavy-tailed: the MGF is infinite for theta > 0")
            raise MgfDomainError(f"theta={theta} outside the MGF domain (sup {sup})")

    def log_mgf(self, theta):
        self._check_theta(theta)
        if theta == 0:
            return 0.0
        return self._tilted_moments(theta)[0]

    def log_mgf_d1(self, theta):
        self._check_theta(theta)
        return self._tilted_moments(theta)[1]

    def log_mgf_d2(self, theta):
        self._check_theta(theta)
        return self._tilted_moments(theta)[2]

    def _integration_range(self, theta):
        lo, hi = self.support

        def g(x):
            return theta * x + float(self.logpdf(x))

        a = lo if np.isfinite(lo) else float(self.quantile(1e-15))
        b = hi if np.isfinite(hi) else float(self.quantile(1.0 - 1e-12))
        if np.isfinite(lo) and not np.isfinite(self.logpdf(a)):
            a = float(np.nextafter(a, np.inf))
        grid = np.linspace(a, b, 1025)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = theta * grid + self.logpdf(grid)
        vals = np.where(np.isfinite(vals), vals, -np.inf)
        peak = float(np.max(vals))
        mode = float(grid[np.argmax(vals)])
        while not np.isfinite(hi) and g(b) > peak - _LOG_FLOOR:
            b = a + 2.0 * (b - a)
            grid = np.linspace(a, b, 1025)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                vals = theta * grid + self.logpdf(grid)
            vals = np.where(np.isfinite(vals), vals, -np.inf)
            if np.max(vals) > peak:
                peak = float(np.max(vals))
                mode = float(grid[np.argmax(vals)])
        while not np.isfinite(lo) and g(a) > peak - _LOG_FLOOR:
            a = b - 2.0 * (b - a)
        return a, b, mode, peak

    def _tilted_moments(self, theta):
        """(psi(theta), mean, variance) of the theta-tilted law by quadrature."""
        a, b, mode, peak = self._integration_range(theta)

        def w(x):
            with np.errstate(over="ignore", invalid="ignore"):
                v = math.exp(theta * x + float(self.logpdf(x)) - peak)
            return v if np.isfinite(v) else 0.0

        kw = dict(limit=500, epsabs=0.0, epsrel=1e-13)
        pts = [mode] if a < mode < b else None
        with warnings.catch_warnings():
            # centred moments can sit at roundoff level; the estimate is still fine
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            i0 = integrate.quad(w, a, b, points=pts, **kw)[0]
            m = mode + integrate.quad(lambda x: (x - mode) * w(x), a, b, points=pts, **kw)[0] / i0
            v = integrate.quad(lambda x: (x - m) ** 2 * w(x), a, b, points=pts, **kw)[0] / i0
        return math.log(i0) + peak, m, v

    # -- transformations -------------------------------------------------
    def tilt(self, theta):
        """Exponentially tilted law, density proportional to exp(theta x) f(x)."""
        if theta == 0:
            return self
        self._check_theta(theta)
        return TiltedDistribution(self, theta)

    def truncate(self, u):
        return TruncatedDistribution(self, u)

    def to_spec(self):
        raise NotImplementedError(f"{type(self).__name__} has no JSON form")


# ---------------------------------------------------------------------------
# heavy-tailed families


@dataclass(frozen=True)
class GeneralizedPareto(Distribution):
    """One-parameter Pareto-type law, f(x) = (xi x)^(-1-1/xi) on [1/xi, inf).

    Its tail index is ``alpha = 1 / xi``.
    """

    xi: float
    family = "generalized_pareto"
    heavy_tailed = True

    def __post_init__(self):
        check_positive(self.xi, "xi")

    @property
    def alpha(self):
        return 1.0 / self.xi

    @property
    def support(self):
        return (1.0 / self.xi, np.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (-1.0 - 1.0 / self.xi) * np.log(self.xi * x)
        return _as_float(np.where(x >= 1.0 / self.xi, val, -np.inf))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(self.xi * x, 1.0)
        return _as_float(np.power(z, -1.0 / self.xi))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(self.xi * x, 1.0)
        return _as_float(-np.expm1(-np.log(z) / self.xi))

    def quantile(self, q):
        return self.isf(1.0 - np.asarray(q, dtype=float))

    def isf(self, p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            return _as_float(np.exp(-self.xi * np.log(p)) / self.xi)

    def mean(self):
        return 1.0 / (self.xi * (1.0 - self.xi)) if self.xi < 1 else np.inf

    def var(self):
        a = self.alpha
        if a <= 2:
            return np.inf
        return a / (self.xi**2 * (a - 1.0) ** 2 * (a - 2.0))

    def sample(self, rng, size=None):
        return self.isf(1.0 - rng.random(size))

    def to_spec(self):
        return {"family": self.family, "params": {"xi": self.xi}}


@dataclass(frozen=True)
class HalfStudentT(Distribution):
    """|T| for T Student-t with ``nu`` degrees of freedom (density doubled on x >= 0)."""

    nu: float
    family = "half_student_t"
    heavy_tailed = True

    def __post_init__(self):
        check_positive(self.nu, "nu")

    @property
    def alpha(self):
        return self.nu

    @property
    def support(self):
        return (0.0, np.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return _as_float(np.where(x >= 0, math.log(2.0) + stats.t.logpdf(x, self.nu), -np.inf))

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(2.0 * stats.t.sf(x, self.nu))

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(1.0 - 2.0 * stats.t.sf(x, self.nu))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return _as_float(stats.t.ppf(0.5 + 0.5 * q, self.nu))

    def isf(self, p):
        return _as_float(stats.t.isf(0.5 * np.asarray(p, dtype=float), self.nu))

    def mean(self):
        nu = self.nu
        if nu <= 1:
            return np.inf
        lg = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
        return 2.0 * math.sqrt(nu) * math.exp(lg) / (math.sqrt(math.pi) * (nu - 1.0))

    def var(self):
        if self.nu <= 2:
            return np.inf
        return self.nu / (self.nu - 2.0) - self.mean() ** 2

    def sample(self, rng, size=None):
        return np.abs(rng.standard_t(self.nu, size))

    def to_spec(self):
        return {"family": self.family, "params": {"nu": self.nu}}


@dataclass(frozen=True)
class LogNormal(Distribution):
    """exp(Y) with Y ~ N(log_mean, log_variance)."""

    log_mean: float = 0.0
    log_variance: float = 1.0
    family = "lognormal"
    heavy_tailed = True

    def __post_init__(self):
        check_positive(self.log_variance, "log_variance")

    @property
    def _s(self):
        return math.sqrt(self.log_variance)

    @property
    def support(self):
        return (0.0, np.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(x)
            val = -lx - math.log(self._s * math.sqrt(2 * math.pi)) - (lx - self.log_mean) ** 2 / (2 * self.log_variance)
        return _as_float(np.where(x > 0, val, -np.inf))

    def _z(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(x, 0.0)) - self.log_mean) / self._s

    def cdf(self, x):
        return _as_float(special.ndtr(self._z(x)))

    def sf(self, x):
        return _as_float(special.ndtr(-self._z(x)))

    def quantile(self, q):
        return _as_float(np.exp(self.log_mean + self._s * special.ndtri(np.asarray(q, dtype=float))))

    def isf(self, p):
        return _as_float(np.exp(self.log_mean - self._s * special.ndtri(np.asarray(p, dtype=float))))

    def mean(self):
        return math.exp(self.log_mean + self.log_variance / 2)

    def var(self):
        return math.expm1(self.log_variance) * math.exp(2 * self.log_mean + self.log_variance)

    def sample(self, rng, size=None):
        return rng.lognormal(self.log_mean, self._s, size)

    def to_spec(self):
        return {"family": self.family, "params": {"log_mean": self.log_mean, "log_variance": self.log_variance}}


@dataclass(frozen=True)
class Weibull(Distribution):
    """Unit-scale Weibull, f(x) = k x^(k-1) exp(-x^k). Heavy-tailed when k < 1."""

    shape: float
    family = "weibull"

    def __post_init__(self):
        check_positive(self.shape, "shape")

    @property
    def heavy_tailed(self):
        return self.shape < 1

    @property
    def mgf_domain_sup(self):
        if self.shape < 1:
            return 0.0
        return 1.0 if self.shape == 1 else np.inf

    @property
    def support(self):
        return (0.0, np.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        k = self.shape
        with np.errstate(divide="ignore", invalid="ignore"):
            val = math.log(k) + (k - 1) * np.log(x) - np.power(x, k)
        if k == 1:
            val = np.where(x >= 0, -x, -np.inf)
        return _as_float(np.where(x > 0, val, -np.inf if k != 1 else val))

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(-np.expm1(-np.power(x, self.shape)))

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(np.exp(-np.power(x, self.shape)))

    def quantile(self, q):
        return _as_float(np.power(-np.log1p(-np.asarray(q, dtype=float)), 1.0 / self.shape))

    def isf(self, p):
        return _as_float(np.power(-np.log(np.asarray(p, dtype=float)), 1.0 / self.shape))

    def mean(self):
        return math.gamma(1 + 1 / self.shape)

    def var(self):
        return math.gamma(1 + 2 / self.shape) - self.mean() ** 2

    def sample(self, rng, size=None):
        return rng.weibull(self.shape, size)

    def to_spec(self):
        return {"family": self.family, "params": {"shape": self.shape}}


# ---------------------------------------------------------------------------
# light-tailed families


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0
    family = "exponential"

    def __post_init__(self):
        check_positive(self.rate, "rate")

    @property
    def support(self):
        return (0.0, np.inf)

    @property
    def mgf_domain_sup(self):
        return self.rate

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return _as_float(np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf))

    def cdf(self, x):
        return _as_float(-np.expm1(-self.rate * np.maximum(np.asarray(x, dtype=float), 0.0)))

    def sf(self, x):
        return _as_float(np.exp(-self.rate * np.maximum(np.asarray(x, dtype=float), 0.0)))

    def quantile(self, q):
        return _as_float(-np.log1p(-np.asarray(q, dtype=float)) / self.rate)

    def isf(self, p):
        return _as_float(-np.log(np.asarray(p, dtype=float)) / self.rate)

    def mean(self):
        return 1.0 / self.rate

    def var(self):
        return 1.0 / self.rate**2

    def log_mgf(self, theta):
        self._check_theta(theta)
        return math.log(self.rate) - math.log(self.rate - theta)

    def log_mgf_d1(self, theta):
        self._check_theta(theta)
        return 1.0 / (self.rate - theta)

    def log_mgf_d2(self, theta):
        self._check_theta(theta)
        return 1.0 / (self.rate - theta) ** 2

    def tilt(self, theta):
        if theta == 0:
            return self
        self._check_theta(theta)
        return Exponential(self.rate - theta)

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def to_spec(self):
        return {"family": self.family, "params": {"rate": self.rate}}


@dataclass(frozen=True)
class Gamma(Distribution):
    """Gamma law with ``shape`` alpha and ``rate`` beta."""

    shape: float
    rate: float = 1.0
    family = "gamma"

    def __post_init__(self):
        check_positive(self.shape, "shape")
        check_positive(self.rate, "rate")

    @property
    def support(self):
        return (0.0, np.inf)

    @property
    def mgf_domain_sup(self):
        return self.rate

    def logpdf(self, x):
        return _as_float(stats.gamma.logpdf(x, self.shape, scale=1.0 / self.rate))

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(special.gammainc(self.shape, self.rate * x))

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(special.gammaincc(self.shape, self.rate * x))

    def quantile(self, q):
        return _as_float(special.gammaincinv(self.shape, np.asarray(q, dtype=float)) / self.rate)

    def isf(self, p):
        return _as_float(special.gammainccinv(self.shape, np.asarray(p, dtype=float)) / self.rate)

    def mean(self):
        return self.shape / self.rate

    def var(self):
        return self.shape / self.rate**2

    def log_mgf(self, theta):
        self._check_theta(theta)
        return -self.shape * math.log1p(-theta / self.rate)

    def log_mgf_d1(self, theta):
        self._check_theta(theta)
        return self.shape / (self.rate - theta)

    def log_mgf_d2(self, theta):
        self._check_theta(theta)
        return self.shape / (self.rate - theta) ** 2

    def tilt(self, theta):
        if theta == 0:
            return self
        self._check_theta(theta)
        return Gamma(self.shape, self.rate - theta)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def to_spec(self):
        return {"family": self.family, "params": {"shape": self.shape, "rate": self.rate}}


@dataclass(frozen=True)
class Normal(Distribution):
    """Normal law parameterized by mean and *variance*."""

    loc: float = 0.0
    variance: float = 1.0
    family = "normal"

    def __post_init__(self):
        check_positive(self.variance, "variance")

    @property
    def scale(self):
        return math.sqrt(self.variance)

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        return _as_float(-0.5 * z * z - math.log(self.scale * math.sqrt(2 * math.pi)))

    def cdf(self, x):
        return _as_float(special.ndtr((np.asarray(x, dtype=float) - self.loc) / self.scale))

    def sf(self, x):
        return _as_float(special.ndtr((self.loc - np.asarray(x, dtype=float)) / self.scale))

    def quantile(self, q):
        return _as_float(self.loc + self.scale * special.ndtri(np.asarray(q, dtype=float)))

    def isf(self, p):
        return _as_float(self.loc - self.scale * special.ndtri(np.asarray(p, dtype=float)))

    def mean(self):
        return self.loc

    def var(self):
        return self.variance

    def log_mgf(self, theta):
        return self.loc * theta + 0.5 * self.variance * theta * theta

    def log_mgf_d1(self, theta):
        return self.loc + self.variance * theta

    def log_mgf_d2(self, theta):
        return self.variance

    def tilt(self, theta):
        if theta == 0:
            return self
        return Normal(self.loc + self.variance * theta, self.variance)

    def truncate(self, u):
        return TruncatedNormal(self.loc, self.scale, -np.inf, u)

    def sample(self, rng, size=None):
        return rng.normal(self.loc, self.scale, size)

    def to_spec(self):
        return {"family": self.family, "params": {"mean": self.loc, "variance": self.variance}}


def _log_norm_mass(za, zb):
    """log(Phi(zb) - Phi(za)) computed without cancellation in either tail."""
    za = np.asarray(za, dtype=float)
    zb = np.asarray(zb, dtype=float)
    upper = za > 0
    # in the upper tail use the mirrored interval (-zb, -za)
    lo = np.where(upper, -zb, za)
    hi = np.where(upper, -za, zb)
    lhi = special.log_ndtr(hi)
    llo = special.log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lhi + np.log1p(-np.exp(llo - lhi))
    return _as_float(out)


@dataclass(frozen=True)
class TruncatedNormal(Distribution):
    """N(loc, scale^2) conditioned on [lower, upper]."""

    loc: float
    scale: float
    lower: float = -np.inf
    upper: float = np.inf
    family = "truncated_normal"

    def __post_init__(self):
        check_positive(self.scale, "scale")
        if not self.lower < self.upper:
            raise ParameterDomainError("lower must be below upper")

    @property
    def _za(self):
        return (self.lower - self.loc) / self.scale

    @property
    def _zb(self):
        return (self.upper - self.loc) / self.scale

    @property
    def _log_mass(self):
        return _log_norm_mass(self._za, self._zb)

    @property
    def support(self):
        return (self.lower, self.upper)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.loc) / self.scale
        val = -0.5 * z * z - math.log(self.scale * math.sqrt(2 * math.pi)) - self._log_mass
        return _as_float(np.where((x >= self.lower) & (x <= self.upper), val, -np.inf))

    def cdf(self, x):
        z = np.clip((np.asarray(x, dtype=float) - self.loc) / self.scale, self._za, self._zb)
        return _as_float(np.exp(_log_norm_mass(self._za, z) - self._log_mass))

    def sf(self, x):
        z = np.clip((np.asarray(x, dtype=float) - self.loc) / self.scale, self._za, self._zb)
        return _as_float(np.exp(_log_norm_mass(z, self._zb) - self._log_mass))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        za, zb = self._za, self._zb
        mass = math.exp(self._log_mass)
        if za > 0:
            # work in the upper tail to keep precision
            z = -special.ndtri(special.ndtr(-za) - q * mass)
        else:
            z = special.ndtri(special.ndtr(za) + q * mass)
        return _as_float(np.clip(self.loc + self.scale * z, self.lower, self.upper))

    def _moments(self, loc):
        za = (self.lower - loc) / self.scale
        zb = (self.upper - loc) / self.scale
        lm = _log_norm_mass(za, zb)
        ra = math.exp(-0.5 * za * za - 0.5 * math.log(2 * math.pi) - lm) if np.isfinite(za) else 0.0
        rb = math.exp(-0.5 * zb * zb - 0.5 * math.log(2 * math.pi) - lm) if np.isfinite(zb) else 0.0
        d1 = ra - rb
        d2 = (za * ra if np.isfinite(za) else 0.0) - (zb * rb if np.isfinite(zb) else 0.0)
        mean = loc + self.scale * d1
        var = self.scale**2 * (1.0 + d2 - d1 * d1)
        return lm, mean, var

    def mean(self):
        return self._moments(self.loc)[1]

    def var(self):
        return self._moments(self.loc)[2]

    def log_mgf(self, theta):
        s2 = self.scale**2
        lm = self._moments(self.loc + s2 * theta)[0]
        return self.loc * theta + 0.5 * s2 * theta * theta + lm - self._log_mass

    def log_mgf_d1(self, theta):
        return self._moments(self.loc + self.scale**2 * theta)[1]

    def log_mgf_d2(self, theta):
        return self._moments(self.loc + self.scale**2 * theta)[2]

    def tilt(self, theta):
        if theta == 0:
            return self
        return TruncatedNormal(self.loc + self.scale**2 * theta, self.scale, self.lower, self.upper)

    def truncate(self, u):
        if u >= self.upper:
            return self
        if u <= self.lower:
            raise EmptyTruncationError(f"truncation level {u} is below the support")
        return TruncatedNormal(self.loc, self.scale, self.lower, u)

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def to_spec(self):
        return {
            "family": self.family,
            "params": {"loc": self.loc, "scale": self.scale, "lower": self.lower, "upper": self.upper},
        }


@dataclass(frozen=True)
class HalfNormal(Distribution):
    """|Z| scaled by ``scale``; density 2 phi(x) on x >= 0 for scale 1."""

    scale: float = 1.0
    family = "half_normal"

    def __post_init__(self):
        check_positive(self.scale, "scale")

    @property
    def support(self):
        return (0.0, np.inf)

    def _as_truncated_normal(self):
        return TruncatedNormal(0.0, self.scale, 0.0, np.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.scale
        val = math.log(2.0) - 0.5 * z * z - math.log(self.scale * math.sqrt(2 * math.pi))
        return _as_float(np.where(x >= 0, val, -np.inf))

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(special.erf(x / (self.scale * _SQRT2)))

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _as_float(special.erfc(x / (self.scale * _SQRT2)))

    def quantile(self, q):
        return _as_float(self.scale * _SQRT2 * special.erfinv(np.asarray(q, dtype=float)))

    def isf(self, p):
        return _as_float(self.scale * _SQRT2 * special.erfcinv(np.asarray(p, dtype=float)))

    def mean(self):
        return self.scale * math.sqrt(2.0 / math.pi)

    def var(self):
        return self.scale**2 * (1.0 - 2.0 / math.pi)

    def log_mgf(self, theta):
        z = theta * self.scale
        return math.log(2.0) + 0.5 * z * z + float(special.log_ndtr(z))

    def log_mgf_d1(self, theta):
        return self._as_truncated_normal().log_mgf_d1(theta)

    def log_mgf_d2(self, theta):
        return self._as_truncated_normal().log_mgf_d2(theta)

    def tilt(self, theta):
        if theta == 0:
            return self
        return self._as_truncated_normal().tilt(theta)

    def truncate(self, u):
        if np.isinf(u):
            return self
        return self._as_truncated_normal().truncate(u)

    def sample(self, rng, size=None):
        return np.abs(rng.normal(0.0, self.scale, size))

    def to_spec(self):
        return {"family": self.family, "params": {"scale": self.scale}}


# ---------------------------------------------------------------------------
# discrete laws


class DiscreteDistribution(Distribution):
    """Finitely many atoms ``values`` with masses ``probs``."""

    family = "discrete"
    continuous = False

    def __init__(self, values, probs):
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if values.shape != probs.shape or values.ndim != 1 or values.size == 0:
            raise ParameterDomainError("values and probs must be matching nonempty 1-D arrays")
        if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ParameterDomainError("probabilities must be nonnegative and sum to 1")
        order = np.argsort(values, kind="stable")
        keep = probs[order] > 0
        self._values = values[order][keep]
        self._probs = probs[order][keep] / probs[order][keep].sum()
        self._cum = np.cumsum(self._probs)
        self._tail = np.append(np.cumsum(self._probs[::-1])[::-1], 0.0)
        for arr in (self._values, self._probs, self._cum, self._tail):
            arr.setflags(write=False)

    def __repr__(self):
        return f"{type(self).__name__}(atoms={self._values.size})"

    @property
    def values(self):
        return self._values

    @property
    def probs(self):
        return self._probs

    @property
    def support(self):
        return (float(self._values[0]), float(self._values[-1]))

    def max(self):
        return float(self._values[-1])

    def pdf(self, x):
        """Probability mass at ``x`` (zero off the atoms)."""
        x = np.asarray(x, dtype=float)
        lo = np.searchsorted(self._values, x, side="left")
        hi = np.searchsorted(self._values, x, side="right")
        cum = np.concatenate([[0.0], self._cum])
        return _as_float(cum[hi] - cum[lo])

    def cdf(self, x):
        idx = np.searchsorted(self._values, np.asarray(x, dtype=float), side="right")
        cum = np.concatenate([[0.0], self._cum])
        return _as_float(np.minimum(cum[idx], 1.0))

    def sf(self, x):
        idx = np.searchsorted(self._values, np.asarray(x, dtype=float), side="right")
        return _as_float(self._tail[idx])

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self._cum, q - 1e-12, side="left")
        return _as_float(self._values[np.clip(idx, 0, self._values.size - 1)])

    def mean(self):
        return float(np.dot(self._probs, self._values))

    def var(self):
        m = self.mean()
        return float(np.dot(self._probs, (self._values - m) ** 2))

    def _tilt_weights(self, theta):
        w = np.log(self._probs) + theta * self._values
        top = w.max()
        e = np.exp(w - top)
        return e / e.sum(), top + math.log(e.sum())

    def log_mgf(self, theta):
        return float(self._tilt_weights(theta)[1])

    def log_mgf_d1(self, theta):
        p, _ = self._tilt_weights(theta)
        return float(np.dot(p, self._values))

    def log_mgf_d2(self, theta):
        p, _ = self._tilt_weights(theta)
        m = np.dot(p, self._values)
        return float(np.dot(p, (self._values - m) ** 2))

    def tilt(self, theta):
        if theta == 0:
            return self
        p, _ = self._tilt_weights(theta)
        return DiscreteDistribution(self._values, p)

    def truncate(self, u):
        if u >= self._values[-1]:
            return self
        keep = self._values <= u
        if not keep.any():
            raise EmptyTruncationError(f"truncation level {u} is below the support")
        return DiscreteDistribution(self._values[keep], self._probs[keep] / self._probs[keep].sum())

    def sample(self, rng, size=None):
        idx = np.searchsorted(self._cum, rng.random(size), side="right")
        return self._values[np.minimum(idx, self._values.size - 1)]


class FiniteLattice(DiscreteDistribution):
    """Masses on the lattice ``x0 + j * span``, j = 0, 1, ..., len(masses) - 1."""

    family = "finite_lattice"

    def __init__(self, x0, span, masses):
        masses = np.asarray(masses, dtype=float)
        check_positive(span, "span")
        if masses.ndim != 1 or masses.size == 0:
            raise ParameterDomainError("masses must be a nonempty 1-D array")
        if np.any(masses < 0) or not math.isclose(masses.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ParameterDomainError("lattice masses must be nonnegative and sum to 1")
        self.x0 = float(x0)
        self.span = float(span)
        self.masses = masses / masses.sum()
        self.masses.setflags(write=False)
        super().__init__(self.x0 + self.span * np.arange(masses.size), self.masses)

    def __repr__(self):
        return f"FiniteLattice(x0={self.x0}, span={self.span}, masses={self.masses.tolist()})"

    def tilt(self, theta):
        if theta == 0:
            return self
        w = np.full(self.masses.size, -np.inf)
        pos = self.masses > 0
        w[pos] = np.log(self.masses[pos]) + theta * (self.x0 + self.span * np.arange(self.masses.size)[pos])
        w = np.exp(w - w[pos].max())
        return FiniteLattice(self.x0, self.span, w / w.sum())

    def to_spec(self):
        return {
            "family": self.family,
            "params": {"x0": self.x0, "span": self.span, "masses": self.masses.tolist()},
        }


class EmpiricalDistribution(DiscreteDistribution):
    """Equal mass 1/N on each observation.

    ``quantile(q)`` returns the ceil(qN)-th order statistic.
    """

    family = "empirical"

    def __init__(self, data):
        data = np.sort(check_sample(data))
        self._data = data
        self._data.setflags(write=False)
        self._values = data
        self._probs = np.full(data.size, 1.0 / data.size)
        self._cum = np.arange(1, data.size + 1) / data.size
        self._tail = 1.0 - np.arange(0, data.size + 1) / data.size
        for arr in (self._probs, self._cum, self._tail):
            arr.setflags(write=False)

    def __repr__(self):
        return f"EmpiricalDistribution(N={self._data.size})"

    @property
    def data(self):
        return self._data

    @property
    def size(self):
        return self._data.size

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        n = self._data.size
        idx = np.ceil(q * n - 1e-9).astype(int) - 1
        return _as_float(self._data[np.clip(idx, 0, n - 1)])

    def sf(self, x):
        idx = np.searchsorted(self._data, np.asarray(x, dtype=float), side="right")
        return _as_float((self._data.size - idx) / self._data.size)

    def cdf(self, x):
        idx = np.searchsorted(self._data, np.asarray(x, dtype=float), side="right")
        return _as_float(idx / self._data.size)

    def sample(self, rng, size=None):
        return self._data[rng.integers(0, self._data.size, size)]

    def resample(self, rng):
        """Bootstrap resample of the same size, drawn with replacement."""
        return EmpiricalDistribution(self.sample(rng, self._data.size))

    def truncate(self, u):
        # truncating at or above the sample maximum is the identity
        if u >= self._data[-1]:
            return self
        keep = self._data[self._data <= u]
        if keep.size == 0:
            raise EmptyTruncationError(f"truncation level {u} is below the sample minimum")
        return EmpiricalDistribution(keep)

    def to_spec(self):
        return {"family": self.family, "params": {"data": self._data.tolist()}}


# ---------------------------------------------------------------------------
# derived laws


class TruncatedDistribution(Distribution):
    """Law of X given X <= level: cdf F(x)/F(u) below u and 1 above."""

    family = "truncated"

    def __init__(self, base, level):
        level = float(level)
        if base.cdf(level) <= 0:
            raise EmptyTruncationError(f"truncation level {level} is below the support of {base!r}")
        self.base = base
        self.level = level
        self._mass = float(base.cdf(level))
        self._base_sf_u = float(base.sf(level))
        self.continuous = base.continuous

    def __repr__(self):
        return f"TruncatedDistribution({self.base!r}, level={self.level})"

    @property
    def support(self):
        lo, hi = self.base.support
        return (lo, min(hi, self.level))

    @property
    def mgf_domain_sup(self):
        return np.inf

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return _as_float(np.where(x <= self.level, self.base.logpdf(x) - math.log(self._mass), -np.inf))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _as_float(np.where(x <= self.level, self.base.cdf(np.minimum(x, self.level)) / self._mass, 1.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        # sf(x) - sf(u) keeps precision in the upper tail
        val = np.maximum(self.base.sf(np.minimum(x, self.level)) - self._base_sf_u, 0.0) / self._mass
        return _as_float(np.where(x < self.level, val, 0.0))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        # mirror into the base upper tail so q near 1 stays accurate
        p = self._base_sf_u + (1.0 - q) * self._mass
        return _as_float(np.minimum(self.base.isf(p), self.level))

    def tilt(self, theta):
        if theta == 0:
            return self
        try:
            tilted_base = self.base.tilt(theta)
        except MgfDomainError:
            return TiltedDistribution(self, theta)
        if isinstance(tilted_base, TiltedDistribution):
            return TiltedDistribution(self, theta)
        return truncate(tilted_base, self.level)

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def to_spec(self):
        return {"family": "truncated", "params": {"base": self.base.to_spec(), "level": self.level}}


class TiltedDistribution(Distribution):
    """Generic exponential tilt exp(theta x - psi(theta)) f(x), evaluated numerically.

    Families with a closed-form tilt never produce this class. The sampler
    inverts a tabulated cdf on a fine grid, so it is accurate to the grid
    resolution rather than exact.
    """

    family = "tilted"
    _GRID = 20001

    def __init__(self, base, theta):
        if not base.continuous:
            raise ParameterDomainError("numeric tilting needs a continuous base law")
        self.base = base
        self.theta = float(theta)
        self._psi = base.log_mgf(theta)
        a, b, _, _ = base._integration_range(theta)
        grid = np.linspace(a, b, self._GRID)
        with np.errstate(over="ignore", invalid="ignore"):
            dens = np.exp(self.theta * grid + base.logpdf(grid) - self._psi)
        dens = np.where(np.isfinite(dens), dens, 0.0)
        cum = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        cum /= cum[-1]
        self._grid = grid
        self._cum = cum

    def __repr__(self):
        return f"TiltedDistribution({self.base!r}, theta={self.theta})"

    @property
    def support(self):
        return self.base.support

    @property
    def mgf_domain_sup(self):
        return self.base.mgf_domain_sup - self.theta

    def logpdf(self, x):
        return _as_float(self.theta * np.asarray(x, dtype=float) + self.base.logpdf(x) - self._psi)

    def cdf(self, x):
        return _as_float(np.interp(np.asarray(x, dtype=float), self._grid, self._cum))

    def sf(self, x):
        return _as_float(1.0 - self.cdf(x))

    def quantile(self, q):
        return _as_float(np.interp(np.asarray(q, dtype=float), self._cum, self._grid))

    def mean(self):
        return self.base.log_mgf_d1(self.theta)

    def var(self):
        return self.base.log_mgf_d2(self.theta)

    def log_mgf(self, t):
        return self.base.log_mgf(self.theta + t) - self._psi

    def log_mgf_d1(self, t):
        return self.base.log_mgf_d1(self.theta + t)

    def log_mgf_d2(self, t):
        return self.base.log_mgf_d2(self.theta + t)

    def tilt(self, t):
        if t == 0:
            return self
        return self.base.tilt(self.theta + t)


class SplicedDistribution(Distribution):
    """Empirical body below ``threshold`` with a GPD tail above it.

    Below the threshold the law coincides with the empirical distribution;
    above it ``sf(threshold + y) = tail_mass * gpd_sf(y)``. The body carries
    ``1 - tail_mass`` spread evenly over the observations at or below the
    threshold, so sampling picks a uniform observation index and replaces
    the tail indices by GPD draws.
    """

    family = "spliced"

    def __init__(self, data, threshold, shape, scale):
        data = np.sort(check_sample(data))
        check_positive(scale, "scale")
        self._data = data
        self.threshold = float(threshold)
        self.shape = float(shape)
        self.scale = float(scale)
        self._n_body = int(np.searchsorted(data, self.threshold, side="right"))
        if self._n_body == 0:
            raise ParameterDomainError("threshold is below every observation")
        self.tail_mass = (data.size - self._n_body) / data.size

    def __repr__(self):
        return (
            f"SplicedDistribution(N={self._data.size}, threshold={self.threshold:.6g}, "
            f"shape={self.shape:.4g}, scale={self.scale:.4g})"
        )

    @property
    def heavy_tailed(self):
        return self.shape > 0

    continuous = False

    @property
    def support(self):
        return (float(self._data[0]), self.threshold + _gpd.gpd_upper_endpoint(self.shape, self.scale))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        emp = (self._data.size - np.searchsorted(self._data, x, side="right")) / self._data.size
        tail = self.tail_mass * _gpd.gpd_sf(x - self.threshold, self.shape, self.scale)
        return _as_float(np.where(x < self.threshold, emp, tail))

    def cdf(self, x):
        return _as_float(1.0 - self.sf(x))

    def pdf(self, x):
        """Density of the continuous tail part; zero below the threshold."""
        x = np.asarray(x, dtype=float)
        dens = self.tail_mass * np.exp(_gpd.gpd_logpdf(x - self.threshold, self.shape, self.scale))
        return _as_float(np.where(x > self.threshold, dens, 0.0))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        n = self._data.size
        idx = np.clip(np.ceil(q * n - 1e-9).astype(int) - 1, 0, n - 1)
        body = self._data[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(q > 1 - self.tail_mass, (1.0 - q) / max(self.tail_mass, 1e-300), 1.0)
            tail = self.threshold + _gpd.gpd_isf(p, self.shape, self.scale)
        return _as_float(np.where(q <= 1 - self.tail_mass, body, tail))

    def mean(self):
        body = self._data[: self._n_body].sum() / self._data.size
        return float(body + self.tail_mass * (self.threshold + _gpd.gpd_mean(self.shape, self.scale)))

    def _tilted_moments(self, theta):
        n = self._data.size
        body = self._data[: self._n_body]
        w_body = np.exp(theta * body) / n

        def tail_w(y, power):
            x = self.threshold + y
            return x**power * math.exp(theta * x) * float(np.exp(_gpd.gpd_logpdf(y, self.shape, self.scale)))

        end = _gpd.gpd_upper_endpoint(self.shape, self.scale)
        m0 = w_body.sum() + self.tail_mass * integrate.quad(lambda y: tail_w(y, 0), 0, end, limit=200)[0]
        m1 = np.dot(w_body, body) + self.tail_mass * integrate.quad(lambda y: tail_w(y, 1), 0, end, limit=200)[0]
        m2 = np.dot(w_body, body**2) + self.tail_mass * integrate.quad(lambda y: tail_w(y, 2), 0, end, limit=200)[0]
        mean = m1 / m0
        return math.log(m0), mean, m2 / m0 - mean * mean

    @property
    def mgf_domain_sup(self):
        if self.shape > 0:
            return 0.0
        if abs(self.shape) < 1e-12:
            return 1.0 / self.scale
        return np.inf

    def tilt(self, theta):
        if theta == 0:
            return self
        self._check_theta(theta)
        return _TiltedSplice(self, float(theta))

    def sample(self, rng, size=None):
        idx = rng.integers(0, self._data.size, size)
        u = 1.0 - rng.random(size)
        tail = self.threshold + _gpd.gpd_isf(u, self.shape, self.scale)
        return np.where(idx < self._n_body, self._data[np.minimum(idx, self._n_body - 1)], tail)


class _TiltedSplice(Distribution):
    """Exponential tilt of a light-tailed splice, used as an importance sampler.

    The tilt reweights the body atoms by exp(theta x) and the GPD tail by
    its tilted density. An exponential tail stays exponential; a bounded
    tail is sampled from a tabulated cdf.
    """

    family = "tilted_spliced"
    continuous = False
    _GRID = 20001

    def __init__(self, base, theta):
        self.base = base
        self.theta = theta
        self._psi = base.log_mgf(theta)
        n = base._data.size
        body = base._data[: base._n_body]
        self._body = body
        self._w_body = np.exp(theta * body - self._psi) / n
        self._p_body = float(self._w_body.sum())
        self._cum_body = np.cumsum(self._w_body) / self._p_body
        self._exp_tail = abs(base.shape) < 1e-12
        if not self._exp_tail:
            end = _gpd.gpd_upper_endpoint(base.shape, base.scale)
            y = np.linspace(0.0, end, self._GRID)
            with np.errstate(divide="ignore", invalid="ignore"):
                dens = np.exp(theta * y + _gpd.gpd_logpdf(y, base.shape, base.scale))
            dens = np.where(np.isfinite(dens), dens, 0.0)
            cum = integrate.cumulative_trapezoid(dens, y, initial=0.0)
            self._y, self._cum_tail = y, cum / cum[-1]

    @property
    def support(self):
        return self.base.support

    def mean(self):
        return self.base.log_mgf_d1(self.theta)

    def sample(self, rng, size=None):
        pick_body = rng.random(size) < self._p_body
        i = np.searchsorted(self._cum_body, rng.random(size), side="right")
        body = self._body[np.minimum(i, self._body.size - 1)]
        u = rng.random(size)
        if self._exp_tail:
            y = -np.log1p(-u) / (1.0 / self.base.scale - self.theta)
        else:
            y = np.interp(u, self._cum_tail, self._y)
        return np.where(pick_body, body, self.base.threshold + y)


# ---------------------------------------------------------------------------
# constructors


_FAMILIES = {
    "generalized_pareto": (GeneralizedPareto, {"xi": "xi"}),
    "half_student_t": (HalfStudentT, {"nu": "nu"}),
    "exponential": (Exponential, {"rate": "rate"}),
    "normal": (Normal, {"mean": "loc", "variance": "variance"}),
    "half_normal": (HalfNormal, {"scale": "scale"}),
    "truncated_normal": (TruncatedNormal, {"loc": "loc", "scale": "scale", "lower": "lower", "upper": "upper"}),
    "weibull": (Weibull, {"shape": "shape"}),
    "lognormal": (LogNormal, {"log_mean": "log_mean", "log_variance": "log_variance"}),
    "gamma": (Gamma, {"shape": "shape", "rate": "rate"}),
}


def make_family(family, **params):
    """Build a parametric family by name.

    >>> make_family("exponential", rate=1.0).log_mgf(0.5)  # log 2
    0.6931471805599453
    """
    if family == "finite_lattice":
        try:
            return FiniteLattice(params.pop("x0", 0.0), params.pop("span", 1.0), params.pop("masses"))
        except KeyError:
            raise ParameterDomainError("finite_lattice needs 'masses'") from None
    if family == "bernoulli":
        p = params.pop("p")
        return FiniteLattice(0.0, 1.0, [1.0 - p, p])
    try:
        cls, names = _FAMILIES[family]
    except KeyError:
        raise ParameterDomainError(f"unknown family {family!r}") from None
    unknown = set(params) - set(names)
    if unknown:
        raise ParameterDomainError(f"unknown parameters for {family}: {sorted(unknown)}")
    try:
        return cls(**{names[k]: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise ParameterDomainError(str(exc)) from None


def from_spec(spec):
    """Inverse of ``Distribution.to_spec``: ``{"family": name, "params": {...}}``."""
    if isinstance(spec, Distribution):
        return spec
    if not isinstance(spec, dict) or "family" not in spec:
        raise ParameterDomainError(f"distribution spec must be an object with a 'family' key, got {spec!r}")
    extra = set(spec) - {"family", "params"}
    if extra:
        raise ParameterDomainError(f"unknown distribution spec keys {sorted(extra)}")
    family = spec["family"]
    params = dict(spec.get("params", {}))
    if family == "truncated":
        return truncate(from_spec(params["base"]), params["level"])
    if family == "empirical":
        return EmpiricalDistribution(params["data"])
    return make_family(family, **params)


def truncate(dist, u):
    """Law of X conditioned on X <= u. ``u = inf`` returns ``dist`` unchanged."""
    u = float(u)
    if math.isinf(u) and u > 0:
        return dist
    if dist.cdf(u) <= 0:
        raise EmptyTruncationError(f"truncation level {u} is below the support")
    if isinstance(dist, (DiscreteDistribution, TruncatedNormal, HalfNormal, Normal)):
        return dist.truncate(u)
    if isinstance(dist, TruncatedDistribution):
        return TruncatedDistribution(dist.base, min(u, dist.level))
    return TruncatedDistribution(dist, u)


def empirical_from(samples):
    return EmpiricalDistribution(samples)


def tilt(dist, theta):
    return dist.tilt(float(theta))


def splice(body, tail_quantile, fit):
    """Empirical body with a GPD tail above the empirical (1 - q)-quantile.

    ``fit`` is anything with ``shape`` and ``scale`` attributes, normally a
    :class:`raretail.evt.GpdFit` obtained from the excesses over that
    quantile.
    """
    if not 0 < tail_quantile < 1:
        raise ParameterDomainError("tail_quantile must lie in (0, 1)")
    if not isinstance(body, EmpiricalDistribution):
        body = EmpiricalDistribution(body)
    threshold = float(body.quantile(1.0 - tail_quantile))
    n_exc = int(np.sum(body.data > threshold))
    if n_exc < MIN_TAIL_EXCESSES:
        raise InsufficientTailDataError(
            f"only {n_exc} observations above the threshold; at least {MIN_TAIL_EXCESSES} are needed"
        )
    return SplicedDistribution(body.data, threshold, fit.shape, fit.scale)
