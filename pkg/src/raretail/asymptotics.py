"""Tail asymptotics for i.i.d. sums and the thresholds derived from them.

Light tails: the tilt equation ``psi'(theta) = b`` and the exact
(Bahadur-Rao type) approximation

    P(S_n > nb) ~ exp(-n I) / (theta* sqrt(2 pi n psi''(theta*)))

with the lattice corrections for strict and non-strict inequalities.
Heavy tails: the one-big-jump approximation ``n sf(gamma - (n-1) mu)``.

Also here: truncation levels that keep the truncated-input estimate
reliable, and the minimum data sizes that make the empirical maximum reach
them.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from ._validation import check_count, check_positive, check_probability
from .distributions import (
    Distribution,
    Exponential,
    Gamma,
    HalfNormal,
    Normal,
    TruncatedNormal,
)
from .exceptions import (
    MgfDomainError,
    MissingSpanError,
    NoMgfError,
    NotRareError,
    ParameterDomainError,
    UnattainableLevelError,
    UnsupportedClassError,
    WrongRegimeError,
)

__all__ = [
    "TiltSolution",
    "solve_tilt",
    "light_asymptotic",
    "log_light_asymptotic",
    "lattice_prefactor",
    "heavy_asymptotic",
    "reliable_truncation_level",
    "unreliable_truncation_level",
    "HeavyPowerLaw",
    "ExponentialLike",
    "NormalLike",
    "min_sample_size",
    "solve_level",
    "DEFAULT_SAFETY",
    "DEFAULT_BETA",
    "DEFAULT_C0",
]

RESIDUAL_TOL = 1e-10
DEFAULT_SAFETY = 1.1  # multiplier on the smallest admissible log-n constant
DEFAULT_BETA = 1.5  # exponent in the heavy-tail rule u = (n (b - mu))^beta
DEFAULT_C0 = 1.0  # floor constant when any c > 0 is admissible


@dataclass(frozen=True)
class TiltSolution:
    theta_star: float
    rate: float
    psi2: float
    psi_at: float
    b: float
    converged: bool
    residual: float = 0.0
    iterations: int = 0

    def to_dict(self):
        return asdict(self)


def solve_tilt(dist: Distribution, b: float, *, tol=RESIDUAL_TOL, max_iter=200) -> TiltSolution:
    """Root of ``psi'(theta) = b`` on (0, sup D).

    Newton from ``min(sup/2, (b - mu)/psi''(0))`` with a bisection backstop;
    the bracket is expanded geometrically when the domain is unbounded.
    """
    if dist.heavy_tailed:
        raise NoMgfError(f"{dist!r} is heavy-tailed; no exponential tilt exists")
    b = float(b)
    mu = float(dist.mean())
    if not b > mu:
        raise NotRareError(f"b={b} must exceed the mean {mu}")
    upper = dist.support[1]
    if b >= upper:
        raise UnattainableLevelError(f"b={b} is at or above the essential supremum {upper}")
    sup = float(dist.mgf_domain_sup)

    def f(theta):
        return dist.log_mgf_d1(theta) - b

    lo, hi = 0.0, sup
    hi_known = False  # whether some f(hi) > 0 has been seen
    theta = min(0.5 * sup, (b - mu) / dist.log_mgf_d2(0.0))
    resid = f(theta)
    if resid < 0:
        lo = theta
    else:
        hi, hi_known = theta, True
    if math.isinf(hi):
        step = max(theta, 1e-3)
        while True:
            step *= 2.0
            if f(lo + step) > 0:
                hi, hi_known = lo + step, True
                break
            if step > 1e12:
                raise UnattainableLevelError(f"no tilt reaches mean {b}")
    def inside(x):
        # the open end of the MGF domain is not a valid iterate
        return lo <= x <= hi if hi_known else lo <= x < hi

    it = 0
    while abs(resid) > tol and it < max_iter:
        it += 1
        if resid < 0:
            lo = theta
        else:
            hi, hi_known = theta, True
        d2 = dist.log_mgf_d2(theta)
        step = theta - resid / d2 if d2 > 0 else np.nan
        theta = step if inside(step) else 0.5 * (lo + hi)
        resid = f(theta)
        if not hi_known and hi - theta < 1e-13 * max(hi, 1.0) and resid < 0:
            raise UnattainableLevelError(f"psi' stays below {b} on the whole MGF domain")
        if hi - lo < 1e-15 * max(abs(theta), 1.0):
            break
    if not hi_known and resid < 0:
        raise UnattainableLevelError(f"psi' stays below {b} on the whole MGF domain")
    for _ in range(3):
        # polish: a small residual can still leave theta loose when psi'' is small
        cand = theta - resid / dist.log_mgf_d2(theta)
        if not inside(cand):
            break
        r = f(cand)
        if abs(r) >= abs(resid):
            break
        theta, resid = cand, r
    psi = dist.log_mgf(theta)
    return TiltSolution(
        theta_star=float(theta),
        rate=float(b * theta - psi),
        psi2=float(dist.log_mgf_d2(theta)),
        psi_at=float(psi),
        b=b,
        converged=bool(abs(resid) <= tol),
        residual=float(abs(resid)),
        iterations=it,
    )


def lattice_prefactor(theta, span, inequality="strict"):
    """Multiplier of the non-lattice formula for a lattice with span ``h``.

    ``theta h e^{-theta h}/(1 - e^{-theta h})`` for ``S_n > nb`` and
    ``theta h/(1 - e^{-theta h})`` for ``S_n >= nb``; both tend to 1 as
    ``h -> 0``.
    """
    x = theta * span
    if x == 0:
        return 1.0
    base = x / -math.expm1(-x)
    if inequality == "strict":
        return base * math.exp(-x)
    if inequality == "nonstrict":
        return base
    raise ParameterDomainError(f"inequality must be 'strict' or 'nonstrict', got {inequality!r}")


def _resolve_span(dist, span, lattice):
    if lattice is None:
        lattice = span is not None or getattr(dist, "span", None) is not None
    if not lattice:
        return None
    span = span if span is not None else getattr(dist, "span", None)
    if span is None:
        raise MissingSpanError("lattice asymptotics need the lattice span h")
    return check_positive(span, "span")


def log_light_asymptotic(dist, n, b, inequality="strict", span=None, lattice=None, solution=None):
    """Natural log of :func:`light_asymptotic`; safe when the value underflows."""
    n = check_count(n, "n")
    if inequality not in ("strict", "nonstrict"):
        raise ParameterDomainError(f"inequality must be 'strict' or 'nonstrict', got {inequality!r}")
    h = _resolve_span(dist, span, lattice)
    sol = solution or solve_tilt(dist, b)
    th = sol.theta_star
    out = -n * sol.rate - math.log(th) - 0.5 * math.log(2 * math.pi * n * sol.psi2)
    if h is not None:
        out += math.log(lattice_prefactor(th, h, inequality))
    return out


def light_asymptotic(dist, n, b, inequality="strict", span=None, lattice=None, solution=None):
    """Exact light-tail asymptotic for P(S_n > nb) (or P(S_n >= nb)).

    ``lattice=None`` picks the lattice prefactor automatically when the
    distribution carries a span (:class:`FiniteLattice`) or ``span`` is
    passed. ``lattice=True`` without any span raises
    :class:`MissingSpanError`. For non-lattice laws the strict and
    non-strict versions coincide.

    >>> from raretail.distributions import Normal
    >>> round(light_asymptotic(Normal(0, 1), 10, 1.0), 8)
    1.27e-05
    """
    return math.exp(log_light_asymptotic(dist, n, b, inequality, span, lattice, solution))


def heavy_asymptotic(dist, n, gamma, *, force=False):
    """One-big-jump approximation ``n sf(gamma - (n - 1) mu)`` for P(S_n > gamma).

    Light-tailed inputs raise :class:`WrongRegimeError` unless ``force`` is set,
    which is useful for bounded laws dominated by a single far atom.
    """
    n = check_count(n, "n")
    if not dist.heavy_tailed and not force:
        raise WrongRegimeError(f"{dist!r} is light-tailed; use light_asymptotic")
    mu = float(dist.mean())
    if not gamma > n * mu:
        raise NotRareError(f"gamma={gamma} must exceed n * mean = {n * mu}")
    return float(n * dist.sf(gamma - (n - 1) * mu))


# ---------------------------------------------------------------------------
# truncation levels


_LIGHT_CLASSES = ("normal", "exponential", "gamma", "exponential_decay")


def _classify(dist):
    if dist.heavy_tailed:
        return "heavy"
    if isinstance(dist, (Normal, HalfNormal, TruncatedNormal)):
        return "normal"
    if isinstance(dist, Exponential):
        return "exponential"
    if isinstance(dist, Gamma):
        return "gamma"
    if math.isinf(dist.mgf_domain_sup):
        # super-exponential decay: every c > 0 is admissible, as for the normal
        return "normal"
    return "exponential_decay"


def reliable_truncation_level(
    dist_class,
    n,
    b,
    *,
    mu=None,
    shape=None,
    decay_rate=None,
    theta_star=None,
    safety=DEFAULT_SAFETY,
    beta=DEFAULT_BETA,
    c0=DEFAULT_C0,
):
    """Smallest truncation level for which the truncated input stays reliable.

    ``dist_class`` is a :class:`Distribution` (class inferred, parameters
    read off it) or one of ``"normal"``, ``"exponential"``, ``"gamma"``,
    ``"exponential_decay"``, ``"heavy"``. Light rules have the form
    ``u = safety * c_min * log n``:

    - normal and other super-exponential tails: ``c_min = c0``
    - exponential: ``c_min = b``
    - gamma: ``c_min = b / shape``
    - density decaying like ``exp(-decay_rate x)``: ``c_min = 1/(decay_rate - theta*)``

    Heavy tails use ``u = (n (b - mu))^beta``.
    """
    n = check_count(n, "n", minimum=2)
    if isinstance(dist_class, Distribution):
        dist = dist_class
        kind = _classify(dist)
        mu = float(dist.mean()) if mu is None else mu
        if kind == "gamma" and shape is None:
            shape = dist.shape
        if kind == "exponential_decay":
            decay_rate = dist.mgf_domain_sup if decay_rate is None else decay_rate
            theta_star = solve_tilt(dist, b).theta_star if theta_star is None else theta_star
    else:
        kind = str(dist_class)
    if mu is not None and not b > mu:
        raise NotRareError(f"b={b} must exceed the mean {mu}")
    log_n = math.log(n)
    if kind == "heavy":
        if mu is None:
            raise ParameterDomainError("the heavy-tail rule needs mu")
        if not beta > 1:
            raise ParameterDomainError("beta must exceed 1")
        return float((n * (b - mu)) ** beta)
    if kind not in _LIGHT_CLASSES:
        raise UnsupportedClassError(f"no truncation rule for class {kind!r}")
    if kind == "normal":
        c_min = check_positive(c0, "c0")
    elif kind == "exponential":
        c_min = b
    elif kind == "gamma":
        if shape is None:
            raise ParameterDomainError("the gamma rule needs the shape parameter")
        c_min = b / check_positive(shape, "shape")
    else:
        if decay_rate is None or theta_star is None:
            raise ParameterDomainError("the exponential-decay rule needs decay_rate and theta_star")
        if not theta_star < decay_rate:
            raise ParameterDomainError("theta_star must be below the decay rate")
        c_min = 1.0 / (decay_rate - theta_star)
    return float(safety * c_min * log_n)


def unreliable_truncation_level(n, b, mu, m_bar=1.0):
    """Heavy-tail level below which truncation is unreliable: mu + m_bar n (b - mu)/sqrt(log n).

    The constant ``m_bar`` is not determined by the theory; this is an
    order-of-magnitude guide only.
    """
    n = check_count(n, "n", minimum=2)
    return float(mu + m_bar * n * (b - mu) / math.sqrt(math.log(n)))


# ---------------------------------------------------------------------------
# minimum data sizes


def _pow(base, exponent):
    with np.errstate(over="ignore"):
        return float(np.exp(exponent * np.log(base)))


@dataclass(frozen=True)
class HeavyPowerLaw:
    """sf(x) = x^(-alpha) L(x); reliable truncation at (n (b - mu))^beta."""

    alpha: float
    beta: float = DEFAULT_BETA
    name = "heavy"

    def __post_init__(self):
        if not self.alpha > 2:
            raise ParameterDomainError("alpha must exceed 2")
        if not self.beta > 1:
            raise ParameterDomainError("beta must exceed 1")

    def reliable_u(self, n, b, mu):
        return (n * (b - mu)) ** self.beta

    def order_of_max(self, N):
        return N ** (1.0 / self.alpha)

    def min_sample_size(self, n, b, mu, target_p=None):
        if target_p is not None:
            return _pow(n, self.beta) / _pow(target_p, self.beta)
        return _pow(n * (b - mu), self.alpha * self.beta)


@dataclass(frozen=True)
class ExponentialLike:
    lam: float
    name = "exponential"

    def __post_init__(self):
        check_positive(self.lam, "lam")

    def reliable_u(self, n, b, mu):
        return b * math.log(n)

    def order_of_max(self, N):
        return math.log(N) / self.lam

    def min_sample_size(self, n, b, mu, target_p=None):
        if target_p is not None:
            return _pow(n, 1.0 + math.sqrt(-2.0 * math.log(target_p) / n))
        return _pow(n, self.lam * b)


@dataclass(frozen=True)
class NormalLike:
    sigma2: float
    c: float = DEFAULT_C0
    name = "normal"

    def __post_init__(self):
        check_positive(self.sigma2, "sigma2")
        check_positive(self.c, "c")

    def reliable_u(self, n, b, mu):
        return self.c * math.log(n)

    def order_of_max(self, N):
        return math.sqrt(2.0 * self.sigma2 * math.log(N))

    def min_sample_size(self, n, b, mu, target_p=None):
        log_n = math.log(n)
        if target_p is not None:
            return _pow(n, -self.c**2 * math.log(target_p) * log_n / ((b - mu) ** 2 * n))
        return _pow(n, self.c**2 / (2.0 * self.sigma2) * log_n)


def min_sample_size(regime, n, b, mu, target_p=None):
    """Minimum data size N for a reliable empirical-input estimate.

    Orders of magnitude only: the regime formulas drop constants and
    slowly varying factors.

    >>> min_sample_size(ExponentialLike(1.0), 100, 2.0, 1.0)
    10000.000000000007
    """
    n = check_count(n, "n")
    if target_p is not None:
        check_probability(target_p, "target_p")
    elif not b > mu:
        raise NotRareError(f"b={b} must exceed mu={mu}")
    return regime.min_sample_size(n, b, mu, target_p)


def solve_level(dist, n, target_p, *, inequality="strict"):
    """Per-summand level b whose asymptotic tail probability equals ``target_p``.

    Heavy tails invert the one-big-jump formula directly; light tails solve
    ``light_asymptotic(dist, n, b) = target_p`` for b.
    """
    n = check_count(n, "n")
    target_p = check_probability(target_p, "target_p")
    mu = float(dist.mean())
    if dist.heavy_tailed:
        return float((dist.isf(target_p / n) + (n - 1) * mu) / n)
    log_p = math.log(target_p)

    def g(b):
        return log_light_asymptotic(dist, n, b, inequality) - log_p

    upper = dist.support[1]
    scale = math.sqrt(dist.var())
    lo = mu + 1e-6 * scale
    if g(lo) <= 0:
        raise NotRareError(f"target_p={target_p} is not rare for n={n}")
    for k in range(1, 80):
        if math.isfinite(upper):
            hi = mu + (upper - mu) * -math.expm1(-k * math.log(2.0))
        else:
            hi = mu + scale * 2.0 ** (k - 1)
        try:
            if g(hi) < 0:
                return float(optimize.brentq(g, lo, hi, xtol=1e-13, rtol=1e-13))
        except (UnattainableLevelError, MgfDomainError):
            break
        lo = hi
    raise UnattainableLevelError(f"target_p={target_p} is below every attainable tail probability")
