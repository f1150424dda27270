import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from raretail._gpd import gpd_isf
from raretail.distributions import make_family
from raretail.evt import (
    GPDTailEstimator,
    HeavyTailDetector,
    IndexSeries,
    TailClass,
    classify_tail,
    default_window,
    gpd_fit,
    gpd_loglik,
    heavy_fraction,
    mom_from_moments,
    moment_series,
    pickands_series,
    pwm_from_moments,
)
from raretail.exceptions import (
    DegenerateDataError,
    InconclusiveError,
    InsufficientTailDataError,
    ParameterDomainError,
)


def gpd_sample(xi, sigma, size, seed):
    u = np.random.default_rng(seed).random(size)
    return gpd_isf(1.0 - u, xi, sigma)


def gpd_population_moments(xi, sigma):
    mean = sigma / (1 - xi)
    var = sigma**2 / ((1 - xi) ** 2 * (1 - 2 * xi))
    a1 = sigma / (2 * (2 - xi))
    return mean, var, a1


# ---------------------------------------------------------------------------
# moment inversions


def test_mom_exponential():
    assert mom_from_moments(1.0, 1.0) == (0.0, 1.0)


def test_pwm_worked_example():
    xi, sigma = pwm_from_moments(4 / 3, 2 / 7)
    assert xi == pytest.approx(0.25, abs=1e-12)
    assert sigma == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(xi=st.floats(-2.0, 0.49), sigma=st.floats(0.01, 100.0))
def test_mom_inverts_population_moments(xi, sigma):
    mean, var, _ = gpd_population_moments(xi, sigma)
    x, s = mom_from_moments(mean, var)
    assert x == pytest.approx(xi, abs=1e-12)
    assert s == pytest.approx(sigma, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(xi=st.floats(-2.0, 0.99), sigma=st.floats(0.01, 100.0))
def test_pwm_inverts_population_moments(xi, sigma):
    mean, a1 = sigma / (1 - xi), sigma / (2 * (2 - xi))
    x, s = pwm_from_moments(mean, a1)
    assert x == pytest.approx(xi, abs=1e-12)
    assert s == pytest.approx(sigma, rel=1e-12)


# ---------------------------------------------------------------------------
# gpd_fit


@pytest.mark.parametrize("method", ["mle", "pwm", "mom"])
def test_fit_recovers_shape(method):
    y = gpd_sample(0.25, 1.0, 10_000, seed=3)
    fit = gpd_fit(y, method)
    assert fit.scale > 0
    tol = 0.05 if method != "mom" else 0.08
    assert fit.shape == pytest.approx(0.25, abs=tol)
    assert fit.scale == pytest.approx(1.0, abs=0.1)


def test_mle_fixed_seed_interval():
    fit = gpd_fit(gpd_sample(0.25, 1.0, 10_000, seed=42), "mle")
    assert 0.20 <= fit.shape <= 0.30


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("xi", [-0.3, 0.0, 0.25, 0.8])
def test_mle_never_worse_than_pwm(seed, xi):
    y = gpd_sample(xi, 2.0, 500, seed)
    mle = gpd_fit(y, "mle")
    pwm = gpd_fit(y, "pwm")
    assert mle.loglik >= pwm.loglik - 1e-9
    assert math.isfinite(mle.loglik)
    assert mle.loglik == pytest.approx(gpd_loglik(y, mle.shape, mle.scale))


def test_mom_shape_below_half():
    fit = gpd_fit(gpd_sample(0.8, 1.0, 2000, seed=1), "mom")
    assert fit.shape < 0.5


@pytest.mark.parametrize("method", ["mle", "pwm", "mom"])
def test_fit_scale_equivariance(method):
    y = gpd_sample(0.2, 1.0, 1000, seed=8)
    a, b = gpd_fit(y, method), gpd_fit(7.5 * y, method)
    assert b.shape == pytest.approx(a.shape, abs=1e-6)
    assert b.scale == pytest.approx(7.5 * a.scale, rel=1e-6)


def test_fit_errors():
    with pytest.raises(InsufficientTailDataError):
        gpd_fit(np.ones(9) + np.arange(9), "mle")
    with pytest.raises(DegenerateDataError):
        gpd_fit(np.full(20, 2.0), "pwm")
    with pytest.raises(ParameterDomainError):
        gpd_fit(np.linspace(-1, 1, 20), "mle")
    with pytest.raises(ParameterDomainError):
        gpd_fit(np.linspace(1, 2, 20), "lmoments")


def test_fitted_sf_formula():
    fit = gpd_fit(gpd_sample(0.3, 1.5, 2000, seed=2), "pwm")
    y = np.array([0.1, 1.0, 10.0])
    expected = (1 + fit.shape * y / fit.scale) ** (-1 / fit.shape)
    np.testing.assert_allclose(fit.sf(y), expected, rtol=1e-12)


# ---------------------------------------------------------------------------
# index series


def descending_quantiles(isf, N):
    # X_(i) = Q(1 - i/N), i = 1..N-1, then a finite last point
    i = np.arange(1, N)
    return isf(i / N)


def test_pickands_exponential_quantiles():
    N = 4000
    x = -np.log(np.arange(1, N + 1) / N)
    s = pickands_series(x, np.arange(1, N // 4 + 1))
    np.testing.assert_allclose(s.xi_hat, 0.0, atol=1e-10)


@pytest.mark.parametrize("xi", [-0.3, 0.1, 0.25, 0.5])
def test_pickands_gpd_quantiles(xi):
    N = 4000
    x = descending_quantiles(lambda p: gpd_isf(p, xi, 1.0), N + 1)
    s = pickands_series(x, np.arange(1, N // 4 + 1))
    np.testing.assert_allclose(s.xi_hat, xi, atol=1e-10)


def test_pickands_gp_majority_positive():
    x = make_family("generalized_pareto", xi=0.4).sample(np.random.default_rng(0), 10_000)
    s = pickands_series(x, np.arange(50, 1001))
    assert np.mean(s.xi_hat > 0) > 0.5


def test_pickands_ties_undefined():
    x = np.concatenate([np.full(50, 100.0), np.arange(1.0, 51.0)])
    s = pickands_series(x, np.arange(1, 26))
    assert np.isnan(s.xi_hat).any()
    assert s.defined.sum() == np.isfinite(s.xi_hat).sum()


def test_pickands_k_limit():
    with pytest.raises(ParameterDomainError):
        pickands_series(np.arange(1.0, 101.0), [26])


def test_moment_pareto_quantiles():
    alpha = 2.5
    N = 10_000
    x = descending_quantiles(lambda p: p ** (-1 / alpha), N + 1)
    s = moment_series(x, [N // 20])
    assert s.xi_hat[0] == pytest.approx(1 / alpha, abs=0.1)


def test_moment_exponential_near_zero():
    x = np.random.default_rng(10).exponential(size=10_000)
    s = moment_series(x, [500])
    assert -0.15 <= s.xi_hat[0] <= 0.15


def test_moment_lognormal_band():
    x = make_family("lognormal", log_mean=-0.5, log_variance=1.0).sample(np.random.default_rng(3), 10_000)
    lo, hi = default_window(x.size)
    s = moment_series(x, np.arange(lo, hi + 1))
    assert np.all(s.xi_hat > 0)
    assert np.mean((s.xi_hat >= 0.2) & (s.xi_hat <= 0.4)) > 0.5


def test_moment_skips_nonpositive():
    x = np.concatenate([np.linspace(1, 10, 30), -np.ones(70)])
    s = moment_series(x, np.arange(1, 60))
    assert s.k.max() <= 29


@pytest.mark.parametrize("c", [0.001, 3.0, 1e4])
def test_series_scale_invariance(c):
    x = make_family("half_student_t", nu=4).sample(np.random.default_rng(1), 4000)
    for fn in (pickands_series, moment_series):
        a, b = fn(x, np.arange(1, 1000)), fn(c * x, np.arange(1, 1000))
        np.testing.assert_allclose(b.xi_hat, a.xi_hat, atol=1e-12, rtol=0)


def test_series_invariants_and_csv():
    x = np.random.default_rng(2).exponential(size=1000)
    s = moment_series(x)
    assert np.all(np.diff(s.k) > 0)
    assert s.k.max() + 1 <= x.size
    p = pickands_series(x)
    assert 4 * p.k.max() <= x.size
    text = p.to_csv()
    assert text.splitlines()[0] == "estimator,k,xi_hat"
    back = IndexSeries.from_csv(text, x.size)
    np.testing.assert_array_equal(back.k, p.k)
    np.testing.assert_array_equal(back.xi_hat, p.xi_hat)


# ---------------------------------------------------------------------------
# classification


def _series(values, k0=100):
    values = np.asarray(values, dtype=float)
    return IndexSeries("moment", np.arange(k0, k0 + values.size), values, 10_000)


def test_classify_unanimous():
    assert classify_tail(_series(np.full(901, 0.4))) is TailClass.HEAVY_RISK
    assert classify_tail(_series(np.full(901, -0.2))) is TailClass.LIGHT_SAFE


def test_classify_strict_majority_and_margin():
    v = np.r_[np.full(50, 0.3), np.full(50, 0.0)]
    assert classify_tail(_series(v), (100, 199)) is TailClass.LIGHT_SAFE
    v[50] = 0.06
    assert classify_tail(_series(v), (100, 199)) is TailClass.HEAVY_RISK
    assert classify_tail(_series(np.full(100, 0.05)), (100, 199)) is TailClass.LIGHT_SAFE
    assert classify_tail(_series(np.full(100, 0.05)), (100, 199), margin=0.0) is TailClass.HEAVY_RISK


def test_classify_skips_undefined_and_needs_ten():
    v = np.full(100, np.nan)
    v[:9] = 0.5
    with pytest.raises(InconclusiveError):
        classify_tail(_series(v), (100, 199))
    v[9] = 0.5
    assert classify_tail(_series(v), (100, 199)) is TailClass.HEAVY_RISK
    frac, m = heavy_fraction(_series(v), (100, 199))
    assert (frac, m) == (1.0, 10)


def test_default_window():
    assert default_window(10_000) == (100, 1000)


def test_heavy_weibull_detected():
    x = make_family("weibull", shape=0.5).sample(np.random.default_rng(4), 10_000)
    assert HeavyTailDetector("moment").fit_predict(x) is TailClass.HEAVY_RISK


# ---------------------------------------------------------------------------
# estimator API


def test_gpd_tail_estimator_api():
    x = make_family("half_student_t", nu=4).sample(np.random.default_rng(6), 20_000)
    est = GPDTailEstimator(method="pwm", tail_quantile=0.05)
    assert est.get_params() == {"method": "pwm", "tail_quantile": 0.05}
    with pytest.raises(NotFittedError):
        est.score(x)
    est.fit(x.reshape(-1, 1))
    assert est.n_excesses_ == 1000
    assert 0.0 < est.shape_ < 0.6
    assert np.isfinite(est.score(x[x > est.threshold_]))
    assert est.sf(est.threshold_) == pytest.approx(1.0)
    twin = clone(est).set_params(method="mle")
    assert twin.get_params()["method"] == "mle" and not hasattr(twin, "fit_")


def test_detector_api():
    det = HeavyTailDetector(estimator="pickands", k_window=(10, 200), margin=0.1)
    assert clone(det).get_params() == {"estimator": "pickands", "k_window": (10, 200), "margin": 0.1}
    x = np.random.default_rng(0).exponential(size=1000)
    det.fit(x)
    assert det.n_defined_ > 10
    assert det.verdict_ in (TailClass.HEAVY_RISK, TailClass.LIGHT_SAFE)
    with pytest.raises(ParameterDomainError):
        HeavyTailDetector(estimator="hill").fit(x)
