"""Generalized Pareto model: distribution functions, MLE fit, diagnostics.

scipy.stats.genpareto uses the same (shape, loc, scale) parameterization, so
it serves as the independent oracle for the closed-form functions and for the
maximum-likelihood fit (scipy fits by direct numerical MLE, this package by
profile likelihood; both must land on the same optimum).
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from feederload import (
    DegenerateDataError,
    DomainError,
    GpdParams,
    InsufficientDataError,
    InvalidParameterError,
    compute_tail_diagnostics,
    fit_gpd_mle,
    gpd_cdf,
    gpd_pdf,
    gpd_quantile,
    gpd_sample,
    log_survival_points,
    mean_excess,
    mean_excess_slope,
    percentile_thresholds,
    zipf_points,
    zipf_tail_slope,
)

HEAVY = GpdParams(kappa=0.58, sigma=74.28, theta=0.25)


def scipy_dist(params: GpdParams):
    return stats.genpareto(params.kappa, loc=params.theta, scale=params.sigma)


class TestDistributionFunctions:
    """pdf/cdf/quantile against scipy and against each other."""

    @pytest.mark.parametrize("kappa", [-0.4, -0.1, 0.0, 0.2, 0.58, 1.5])
    def test_pdf_matches_scipy(self, kappa):
        params = GpdParams(kappa=kappa, sigma=2.5, theta=1.0)
        hi = params.upper if math.isfinite(params.upper) else 40.0
        x = np.linspace(params.theta, hi, 200, endpoint=False)
        assert np.allclose(gpd_pdf(x, params), scipy_dist(params).pdf(x),
                           rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("kappa", [-0.4, 0.0, 0.2, 0.58, 1.5])
    def test_cdf_matches_scipy(self, kappa):
        params = GpdParams(kappa=kappa, sigma=2.5, theta=1.0)
        hi = params.upper if math.isfinite(params.upper) else 40.0
        x = np.linspace(params.theta, hi, 200, endpoint=False)
        assert np.allclose(gpd_cdf(x, params), scipy_dist(params).cdf(x),
                           rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("kappa", [-0.4, 0.0, 0.2, 0.58, 1.5])
    def test_quantile_matches_scipy(self, kappa):
        params = GpdParams(kappa=kappa, sigma=2.5, theta=1.0)
        q = np.linspace(0.001, 0.999, 200)
        assert np.allclose(gpd_quantile(q, params), scipy_dist(params).ppf(q),
                           rtol=1e-10, atol=1e-12)

    def test_outside_support(self):
        params = GpdParams(kappa=0.3, sigma=1.0, theta=5.0)
        assert gpd_pdf(4.0, params) == 0.0
        assert gpd_cdf(4.0, params) == 0.0
        neg = GpdParams(kappa=-0.5, sigma=1.0, theta=0.0)
        beyond = neg.upper + 1.0
        assert gpd_pdf(beyond, neg) == 0.0
        assert gpd_cdf(beyond, neg) == 1.0

    def test_upper_endpoint(self):
        neg = GpdParams(kappa=-0.5, sigma=1.0, theta=3.0)
        assert neg.upper == pytest.approx(3.0 - 1.0 / -0.5)
        assert gpd_quantile(1.0, neg) == pytest.approx(neg.upper)
        assert gpd_quantile(1.0, HEAVY) == math.inf
        assert GpdParams(0.0, 1.0).upper == math.inf

    def test_median_of_heavy_tail_params(self):
        # theta + sigma * (2**kappa - 1) / kappa for the headline parameters.
        assert gpd_quantile(0.5, HEAVY) == pytest.approx(63.62, abs=0.05)

    def test_quantile_domain_error(self):
        with pytest.raises(DomainError):
            gpd_quantile(-0.1, HEAVY)
        with pytest.raises(DomainError):
            gpd_quantile([0.2, 1.3], HEAVY)

    def test_scalar_in_scalar_out(self):
        assert isinstance(gpd_pdf(1.0, HEAVY), float)
        assert isinstance(gpd_cdf(1.0, HEAVY), float)
        assert isinstance(gpd_quantile(0.4, HEAVY), float)
        assert gpd_pdf(np.array([1.0, 2.0]), HEAVY).shape == (2,)

    def test_parameter_validation(self):
        with pytest.raises(InvalidParameterError):
            GpdParams(kappa=0.2, sigma=0.0)
        with pytest.raises(InvalidParameterError):
            GpdParams(kappa=0.2, sigma=-1.0)
        with pytest.raises(InvalidParameterError):
            GpdParams(kappa=math.nan, sigma=1.0)

    @given(
        kappa=st.floats(-0.5, 2.0),
        sigma=st.floats(0.01, 100.0),
        theta=st.floats(-10.0, 10.0),
        q=st.floats(0.001, 0.999),
    )
    def test_quantile_cdf_round_trip(self, kappa, sigma, theta, q):
        params = GpdParams(kappa=kappa, sigma=sigma, theta=theta)
        assert gpd_cdf(gpd_quantile(q, params), params) == pytest.approx(
            q, abs=1e-9
        )

    @given(
        kappa=st.floats(-0.5, 2.0),
        x=st.lists(st.floats(0.0, 50.0), min_size=2, max_size=20),
    )
    def test_cdf_monotone(self, kappa, x):
        params = GpdParams(kappa=kappa, sigma=1.7, theta=0.0)
        values = gpd_cdf(np.sort(np.asarray(x)), params)
        assert np.all(np.diff(values) >= -1e-12)


class TestSampling:
    def test_deterministic_given_seed(self):
        a = gpd_sample(HEAVY, 1000, np.random.default_rng(5))
        b = gpd_sample(HEAVY, 1000, np.random.default_rng(5))
        assert np.array_equal(a, b)

    def test_seed_accepted_directly(self):
        a = gpd_sample(HEAVY, 100, 5)
        b = gpd_sample(HEAVY, 100, np.random.default_rng(5))
        assert np.array_equal(a, b)

    def test_distribution_against_scipy_ks(self):
        x = gpd_sample(GpdParams(0.3, 2.0, 1.0), 20_000,
                       np.random.default_rng(11))
        res = stats.kstest(x, scipy_dist(GpdParams(0.3, 2.0, 1.0)).cdf)
        assert res.pvalue > 0.01

    def test_support_respected(self):
        x = gpd_sample(GpdParams(-0.5, 1.0, 2.0), 5000,
                       np.random.default_rng(3))
        assert np.all(x >= 2.0)
        assert np.all(x <= 2.0 + 1.0 / 0.5)

    def test_sizes(self):
        assert gpd_sample(HEAVY, 0, np.random.default_rng(0)).size == 0
        with pytest.raises(InvalidParameterError):
            gpd_sample(HEAVY, -1, np.random.default_rng(0))


class TestFit:
    def test_recovers_planted_parameters(self):
        x = gpd_sample(HEAVY, 10_000, np.random.default_rng(21))
        fit = fit_gpd_mle(x, theta=0.25)
        assert fit.params.kappa == pytest.approx(0.58, abs=0.05)
        assert fit.params.sigma == pytest.approx(74.28, rel=0.05)
        assert fit.params.theta == 0.25
        assert fit.n_samples == 10_000
        assert fit.n_iterations >= 1

    def test_agrees_with_scipy_mle(self):
        x = gpd_sample(GpdParams(0.4, 3.0, 0.0), 5000,
                       np.random.default_rng(8))
        fit = fit_gpd_mle(x, theta=0.0)
        c, _, scale = stats.genpareto.fit(x, floc=0.0)
        assert fit.params.kappa == pytest.approx(c, abs=0.02)
        assert fit.params.sigma == pytest.approx(scale, rel=0.02)
        ll_scipy = float(np.sum(stats.genpareto.logpdf(x, c, 0.0, scale)))
        assert fit.log_likelihood >= ll_scipy - 0.01

    def test_exponential_data_gives_small_kappa(self):
        x = np.random.default_rng(9).exponential(3.0, 20_000)
        fit = fit_gpd_mle(x, theta=0.0)
        assert abs(fit.params.kappa) < 0.05
        assert fit.params.sigma == pytest.approx(3.0, rel=0.05)

    def test_confidence_intervals_bracket_estimate(self):
        x = gpd_sample(HEAVY, 5000, np.random.default_rng(13))
        fit = fit_gpd_mle(x, theta=0.25)
        assert fit.ci_kappa[0] < fit.params.kappa < fit.ci_kappa[1]
        assert 0.0 < fit.ci_sigma[0] < fit.params.sigma < fit.ci_sigma[1]

    def test_default_theta_sits_below_minimum(self):
        x = gpd_sample(HEAVY, 2000, np.random.default_rng(17))
        fit = fit_gpd_mle(x)
        assert fit.params.theta < float(np.min(x))
        assert fit.params.theta == pytest.approx(float(np.min(x)), rel=1e-6)

    def test_samples_below_theta_rejected(self):
        x = gpd_sample(HEAVY, 1000, np.random.default_rng(19))
        with pytest.raises(InvalidParameterError):
            fit_gpd_mle(x, theta=float(np.min(x)) + 1.0)

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            fit_gpd_mle(np.ones(29) + np.arange(29))

    def test_degenerate_sample(self):
        with pytest.raises(DegenerateDataError):
            fit_gpd_mle(np.full(100, 3.0), theta=3.0)
        with pytest.raises(DegenerateDataError):
            fit_gpd_mle(np.concatenate([[math.nan], np.ones(99)]))

    def test_summary_mentions_estimates(self):
        x = gpd_sample(HEAVY, 1000, np.random.default_rng(23))
        text = fit_gpd_mle(x, theta=0.25).summary()
        assert "kappa=" in text and "sigma=" in text and "theta=" in text


class TestMeanExcess:
    def test_hand_example(self):
        x = np.arange(1.0, 11.0)
        pts = mean_excess(x, [5.0], min_exceedances=5)
        # Exceedances above 5 are 6..10, excesses 1..5, mean 3.
        assert pts.shape == (1, 2)
        assert pts[0, 0] == 5.0
        assert pts[0, 1] == pytest.approx(3.0)

    def test_thin_thresholds_dropped(self):
        x = np.arange(1.0, 11.0)
        assert mean_excess(x, [5.0], min_exceedances=10).shape == (0, 2)

    def test_gpd_slope(self):
        x = gpd_sample(HEAVY, 100_000, np.random.default_rng(31))
        slope = mean_excess_slope(x)
        assert slope == pytest.approx(0.58 / (1.0 - 0.58), rel=0.15)

    def test_exponential_is_flat_at_sigma(self):
        x = np.random.default_rng(33).exponential(4.0, 100_000)
        pts = mean_excess(x, percentile_thresholds(x))
        assert np.all(np.abs(pts[:, 1] - 4.0) < 0.4)
        assert abs(mean_excess_slope(x)) < 0.05

    def test_percentile_thresholds(self):
        x = np.random.default_rng(35).exponential(1.0, 1000)
        u = percentile_thresholds(x, lo=10.0, hi=60.0, num=11)
        assert np.all(np.diff(u) > 0)
        assert u[0] >= float(np.min(x)) and u[-1] <= float(np.max(x))
        with pytest.raises(DomainError):
            percentile_thresholds(x, lo=60.0, hi=10.0)

    def test_slope_needs_two_points(self):
        with pytest.raises(InsufficientDataError):
            mean_excess_slope(np.ones(5))


class TestRankDiagnostics:
    def test_zipf_hand_example(self):
        x = [math.e, math.e**3, math.e**2]
        pts = zipf_points(x)
        assert np.allclose(pts[:, 0], np.log([1.0, 2.0, 3.0]))
        assert np.allclose(pts[:, 1], [3.0, 2.0, 1.0])

    def test_zipf_requires_positive(self):
        with pytest.raises(DomainError):
            zipf_points([1.0, 0.0, 2.0])

    def test_zipf_tail_slope_on_power_law(self):
        # A small scale pushes the power-law regime well below min_value.
        x = gpd_sample(GpdParams(0.58, 0.5, 0.25), 100_000,
                       np.random.default_rng(37))
        slope = zipf_tail_slope(x, min_value=10.0)
        assert slope == pytest.approx(-1.0 / 0.58, rel=0.2)

    def test_zipf_tail_slope_needs_tail(self):
        with pytest.raises(InsufficientDataError):
            zipf_tail_slope(np.full(50, 2.0), min_value=10.0)

    def test_log_survival_hand_example(self):
        pts = log_survival_points([1.0, 2.0, 4.0])
        # Descending values 4, 2, 1 with survival 1/3, 2/3, 3/3.
        assert np.allclose(pts[:, 0], np.log([4.0, 2.0, 1.0]))
        assert np.allclose(pts[:, 1], np.log([1 / 3, 2 / 3, 1.0]))

    def test_log_survival_largest_point_is_one_over_n(self):
        x = np.random.default_rng(39).exponential(1.0, 500)
        pts = log_survival_points(x)
        assert pts[0, 1] == pytest.approx(math.log(1.0 / 500))
        assert pts[-1, 1] == pytest.approx(0.0)

    @given(st.lists(st.floats(0.001, 1e6), min_size=2, max_size=50))
    def test_zipf_points_ordering(self, values):
        pts = zipf_points(values)
        assert np.all(np.diff(pts[:, 0]) > 0)
        assert np.all(np.diff(pts[:, 1]) <= 1e-12)

    def test_compute_tail_diagnostics_consistent(self):
        x = gpd_sample(HEAVY, 2000, np.random.default_rng(41))
        diag = compute_tail_diagnostics(x)
        assert np.array_equal(diag.zipf, zipf_points(x))
        assert np.array_equal(diag.log_survival, log_survival_points(x))
        assert np.array_equal(
            diag.mean_excess, mean_excess(x, percentile_thresholds(x))
        )

    def test_empty_and_non_finite_samples(self):
        with pytest.raises(DegenerateDataError):
            zipf_points([])
        with pytest.raises(DegenerateDataError):
            log_survival_points([1.0, math.inf])
