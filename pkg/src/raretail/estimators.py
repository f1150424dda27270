"""Monte Carlo estimators of p = P(S_n > gamma) for i.i.d. sums.

Three replicate types:

- crude: the indicator ``I(S_n > gamma)``
- conditional (Asmussen-Kroese): ``n sf(max(M_{n-1}, gamma - S_{n-1}))``,
  the workhorse for heavy tails
- importance sampling under the exponential tilt at theta*: the weight
  ``exp(-theta S_n + n psi(theta)) I(S_n > gamma)``, for light tails

The replicate formulas are exposed as pure functions of a draw matrix, so
tests can take exact expectations by enumerating every outcome of a small
discrete law.

Determinism: replicates are generated in fixed blocks of ``BLOCK``. Block
``j`` of estimator ``e`` draws from ``SeedSequence(seed, spawn_key=(id(e), j))``.
Blocks are combined in index order, so the result does not depend on how
many worker threads ran them.
"""

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._validation import check_count, worker_count
from .asymptotics import solve_tilt
from .distributions import Exponential, FiniteLattice, Gamma, Normal
from .exceptions import GridTooLargeError, NoMgfError, ParameterDomainError, UnsupportedClassError

__all__ = [
    "EstimateResult",
    "BLOCK",
    "crude_mc",
    "cond_mc_ak",
    "is_tilted_mc",
    "estimate",
    "exact_convolution",
    "exact_tail",
    "cond_mc_bias_bound",
    "crude_values",
    "ak_values",
    "is_values",
    "block_rng",
]

BLOCK = 8192
MAX_GRID = 10**6


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    std_error: float
    replications: int
    estimator: str
    seed: object
    replicates: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def variance(self):
        """Replicate variance (std_error squared times R)."""
        return self.std_error**2 * self.replications

    @property
    def relative_error(self):
        return self.std_error / self.estimate if self.estimate > 0 else math.inf

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "replications": self.replications,
            "estimator": self.estimator,
            "seed": list(self.seed) if isinstance(self.seed, tuple) else self.seed,
        }


# ---------------------------------------------------------------------------
# replicate functions


def crude_values(x, gamma):
    """Indicator replicates for a draw matrix ``x`` of shape (R, n)."""
    return (np.sum(x, axis=-1) > gamma).astype(float)


def ak_values(dist, x, n, gamma):
    """Conditional replicates from the first n - 1 summands ``x`` (shape (R, n-1))."""
    x = np.asarray(x, dtype=float)
    if n == 1:
        return np.full(x.shape[:-1], n * float(dist.sf(gamma)))
    s = np.sum(x, axis=-1)
    m = np.max(x, axis=-1)
    return n * np.asarray(dist.sf(np.maximum(m, gamma - s)), dtype=float)


def is_values(x, gamma, theta, psi):
    """Likelihood-ratio weighted indicators for draws ``x`` from the theta-tilted law."""
    s = np.sum(x, axis=-1)
    n = x.shape[-1]
    with np.errstate(over="ignore"):
        w = np.exp(-theta * s + n * psi)
    return np.where(s > gamma, w, 0.0)


# ---------------------------------------------------------------------------
# block machinery


def _stream_id(label):
    return zlib.crc32(label.encode())


def _resolve_seed(seed):
    if seed is None:
        return int(np.random.SeedSequence().entropy % 2**63)
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63))
    if isinstance(seed, (list, tuple)):
        return tuple(int(s) for s in seed)
    return int(seed)


def block_rng(seed, label, block):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_stream_id(label), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def _run_blocks(make_values, R, seed, label, estimator, keep, workers):
    R = check_count(R, "R")
    seed = _resolve_seed(seed)
    sizes = [min(BLOCK, R - j * BLOCK) for j in range(-(-R // BLOCK))]

    def run(j):
        vals = make_values(block_rng(seed, label, j), sizes[j])
        return vals

    w = worker_count(workers)
    if w > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=w) as pool:
            blocks = list(pool.map(run, range(len(sizes))))
    else:
        blocks = [run(j) for j in range(len(sizes))]

    # Chan et al. pairwise update, always in block order; values are shifted
    # by the first replicate so a constant estimator has exactly zero spread
    shift = float(blocks[0][0])
    count, mean, m2 = 0, 0.0, 0.0
    for vals in blocks:
        vals = vals - shift
        k = vals.size
        bm = float(np.mean(vals))
        bm2 = float(np.sum((vals - bm) ** 2))
        delta = bm - mean
        tot = count + k
        mean += delta * k / tot
        m2 += bm2 + delta * delta * count * k / tot
        count = tot
    se = math.sqrt(m2 / (count - 1) / count) if count > 1 else 0.0
    reps = np.concatenate(blocks) if keep else None
    return EstimateResult(max(shift + mean, 0.0), se, count, estimator, seed, reps)


def _draws(dist, rng, size, n):
    return np.asarray(dist.sample(rng, (size, n)), dtype=float)


# ---------------------------------------------------------------------------
# estimators


def crude_mc(dist, n, gamma, R, seed=None, *, keep_replicates=False, workers=None, stream="crude"):
    """Plain Monte Carlo: the mean of R indicators I(S_n > gamma)."""
    n = check_count(n, "n")

    def make(rng, size):
        return crude_values(_draws(dist, rng, size, n), gamma)

    return _run_blocks(make, R, seed, stream, "crude", keep_replicates, workers)


def cond_mc_ak(dist, n, gamma, R, seed=None, *, keep_replicates=False, workers=None, stream="ak"):
    """Asmussen-Kroese conditional Monte Carlo.

    Unbiased for ``n P(S_n > gamma, max attained uniquely at the last index)``,
    which equals p for continuous laws. On discrete inputs the gap is the
    tie bias bounded by :func:`cond_mc_bias_bound`.
    """
    n = check_count(n, "n")

    def make(rng, size):
        if n == 1:
            return ak_values(dist, np.empty((size, 0)), 1, gamma)
        return ak_values(dist, _draws(dist, rng, size, n - 1), n, gamma)

    return _run_blocks(make, R, seed, stream, "cond_mc_ak", keep_replicates, workers)


def is_tilted_mc(
    dist, n, b, R, seed=None, *, theta=None, keep_replicates=False, workers=None, stream="is_tilted"
):
    """Importance sampling from the exponential tilt, gamma = n b.

    ``theta`` defaults to the tilt root theta* of ``psi'(theta) = b``.
    With ``theta=0`` and ``stream="crude"`` the replicates coincide with
    those of :func:`crude_mc`.
    """
    n = check_count(n, "n")
    if dist.heavy_tailed:
        raise NoMgfError(f"{dist!r} is heavy-tailed; importance sampling by tilting is unavailable")
    gamma = n * b
    if theta is None:
        theta = solve_tilt(dist, b).theta_star
    theta = float(theta)
    psi = dist.log_mgf(theta) if theta != 0 else 0.0
    tilted = dist.tilt(theta)

    def make(rng, size):
        return is_values(_draws(tilted, rng, size, n), gamma, theta, psi)

    return _run_blocks(make, R, seed, stream, "is_tilted", keep_replicates, workers)


def estimate(dist, n, gamma, R, seed=None, *, method="auto", workers=None):
    """Dispatch to the estimator suited to the tail.

    ``auto`` uses conditional MC for heavy tails and tilted IS for light
    ones. When even n copies of the largest support point cannot exceed
    gamma the answer is exactly 0 and no sampling is done.
    """
    n = check_count(n, "n")
    upper = dist.support[1]
    if n * upper <= gamma:
        return EstimateResult(0.0, 0.0, 0, "support_bound", _resolve_seed(seed))
    if method == "auto":
        method = "cond_mc_ak" if dist.heavy_tailed else "is_tilted"
    if method == "crude":
        return crude_mc(dist, n, gamma, R, seed, workers=workers)
    if method == "cond_mc_ak":
        return cond_mc_ak(dist, n, gamma, R, seed, workers=workers)
    if method == "is_tilted":
        if gamma / n <= dist.mean():
            # not a rare event for this input; tilting has nothing to do
            return crude_mc(dist, n, gamma, R, seed, workers=workers)
        return is_tilted_mc(dist, n, gamma / n, R, seed, workers=workers)
    raise ParameterDomainError(f"unknown estimator {method!r}")


# ---------------------------------------------------------------------------
# exact oracles


def exact_convolution(dist: FiniteLattice, n, gamma, inequality="strict"):
    """Exact P(S_n > gamma) (or >=) for a finite lattice law by repeated convolution."""
    if not isinstance(dist, FiniteLattice):
        raise UnsupportedClassError("exact convolution needs a FiniteLattice")
    n = check_count(n, "n")
    k = dist.masses.size
    grid = (k - 1) * n + 1
    if grid > MAX_GRID:
        raise GridTooLargeError(f"{grid} lattice points exceed the limit of {MAX_GRID}")
    pmf = np.array([1.0])
    for _ in range(n):
        pmf = np.convolve(pmf, dist.masses)
    if inequality not in ("strict", "nonstrict"):
        raise ParameterDomainError(f"inequality must be 'strict' or 'nonstrict', got {inequality!r}")
    t = (gamma - n * dist.x0) / dist.span
    if math.isinf(t):
        return 1.0 if t < 0 else 0.0
    r = round(t)
    if abs(t - r) <= 1e-9 * max(1.0, abs(t)):
        # gamma sits on the lattice: strict and non-strict differ by one atom
        first = r + 1 if inequality == "strict" else r
    else:
        first = math.floor(t) + 1
    first = max(first, 0)
    if first >= pmf.size:
        return 0.0
    return float(min(np.sum(pmf[first:][::-1]), 1.0))


def exact_tail(dist, n, gamma):
    """P(S_n > gamma) in closed form where the n-fold sum has a known law."""
    if isinstance(dist, Exponential):
        return float(stats.gamma.sf(gamma, n, scale=1.0 / dist.rate))
    if isinstance(dist, Gamma):
        return float(stats.gamma.sf(gamma, n * dist.shape, scale=1.0 / dist.rate))
    if isinstance(dist, Normal):
        return float(stats.norm.sf(gamma, n * dist.loc, math.sqrt(n * dist.variance)))
    if isinstance(dist, FiniteLattice):
        return exact_convolution(dist, n, gamma)
    raise UnsupportedClassError(f"no closed-form sum law for {dist!r}")


def cond_mc_bias_bound(n, N):
    """Factor 1 - (1 - 1/N)^n bounding the tie bias of conditional MC.

    The bias on an N-point equal-mass input is at most this factor times
    P(S_n > gamma | max not unique).
    """
    n = check_count(n, "n")
    N = check_count(N, "N")
    return float(-math.expm1(n * math.log1p(-1.0 / N)))
