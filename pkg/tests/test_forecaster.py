"""Decomposed day-ahead forecaster: fits, predictions, order selection.

Planted-model recovery is the backbone: histories simulated from a known
ARX or vector-ARX model must return that model from the least-squares fit to
roundoff when noiseless, and the composed total-times-shape forecast must
reproduce the planted next day.  Hand-sized examples pin the lag orientation
and the window conventions.
"""

from __future__ import annotations

import numpy as np
import pytest

import support
from feederload import (
    ArxModel,
    CvResult,
    DegenerateDataError,
    HOURS,
    InsufficientDataError,
    InvalidParameterError,
    LoadHistory,
    SingularFitError,
    VectorArxModel,
    cross_validate_order,
    decompose_day,
    fit_shape_varx,
    fit_total_arx,
    fit_vector_arx,
    forecast_day,
    one_step_forecasts,
    predict_shape,
    predict_total,
)


class TestDecomposeDay:
    def test_splits_into_total_and_shape(self):
        profile = np.arange(24.0)
        total, shape = decompose_day(profile)
        assert total == pytest.approx(276.0)
        assert shape.sum() == pytest.approx(1.0)
        assert np.allclose(total * shape, profile)

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            decompose_day(np.ones(23))
        with pytest.raises(InvalidParameterError):
            decompose_day(-np.ones(24))
        with pytest.raises(DegenerateDataError):
            decompose_day(np.zeros(24))
        with pytest.raises(DegenerateDataError):
            decompose_day(np.full(24, np.nan))


class TestLoadHistory:
    def test_shape_validation(self):
        with pytest.raises(InvalidParameterError):
            LoadHistory(loads=np.ones((5, 23)), temps=np.ones((5, 24)))
        with pytest.raises(InvalidParameterError):
            LoadHistory(loads=np.ones((5, 24)), temps=np.ones((8, 24)))
        with pytest.raises(InvalidParameterError):
            LoadHistory(loads=-np.ones((5, 24)), temps=np.ones((5, 24)))
        with pytest.raises(DegenerateDataError):
            LoadHistory(loads=np.full((5, 24), np.nan),
                        temps=np.ones((5, 24)))

    def test_dates_must_cover_temp_rows(self):
        with pytest.raises(InvalidParameterError):
            LoadHistory(loads=np.ones((2, 24)), temps=np.ones((3, 24)),
                        dates=("2021-01-01", "2021-01-02"))

    def test_forecast_temps_flag(self):
        plain = LoadHistory(loads=np.ones((3, 24)), temps=np.ones((3, 24)))
        extra = LoadHistory(loads=np.ones((3, 24)), temps=np.ones((4, 24)))
        assert not plain.has_forecast_temps
        assert extra.has_forecast_temps

    def test_derived_series(self):
        loads = np.outer([24.0, 48.0], np.full(24, 1.0 / 24))
        temps = np.tile(np.arange(24.0), (2, 1))
        hist = LoadHistory(loads=loads, temps=temps)
        assert np.allclose(hist.totals(), [24.0, 48.0])
        assert np.allclose(hist.daily_mean_temps(), [11.5, 11.5])
        assert np.allclose(hist.shapes(), np.full((2, 24), 1.0 / 24))

    def test_zero_day_gets_uniform_shape(self):
        loads = np.vstack([np.zeros(24), np.ones(24)])
        hist = LoadHistory(loads=loads, temps=np.ones((2, 24)))
        assert np.allclose(hist.shapes()[0], 1.0 / 24)

    def test_head(self):
        hist = LoadHistory(loads=np.ones((5, 24)), temps=np.ones((6, 24)),
                           dates=[f"2021-01-0{d}" for d in range(1, 7)])
        first = hist.head(3)
        assert first.n_days == 3
        assert first.temps.shape == (3, 24)
        assert first.dates == ("2021-01-01", "2021-01-02", "2021-01-03")
        with pytest.raises(InvalidParameterError):
            hist.head(0)
        with pytest.raises(InvalidParameterError):
            hist.head(6)


class TestScalarModel:
    def test_lag_orientation_hand_example(self):
        # Chronological window (4, 8): index 0 multiplies the recent day 8.
        model = ArxModel(a=[0.5, 0.25], b=[0.0, 0.0, 0.0], intercept=0.0)
        assert model.predict([4.0, 8.0], [0.0, 0.0, 0.0]) == pytest.approx(5.0)
        assert predict_total(model, [4.0, 8.0], [0.0, 0.0, 0.0]) \
            == pytest.approx(5.0)

    def test_exogenous_orientation(self):
        # b[0] multiplies the forecast day's temperature, the window's last.
        model = ArxModel(a=[0.0], b=[1.0, 0.0], intercept=0.0)
        assert model.predict([7.0], [3.0, 9.0]) == pytest.approx(9.0)

    def test_window_length_checked(self):
        model = ArxModel(a=[0.5], b=[0.0, 0.0], intercept=0.0)
        with pytest.raises(InvalidParameterError):
            model.predict([1.0, 2.0], [0.0, 0.0])
        with pytest.raises(InvalidParameterError):
            model.predict([1.0], [0.0])

    def test_coefficient_lengths_checked(self):
        with pytest.raises(InvalidParameterError):
            ArxModel(a=[0.5], b=[0.0], intercept=0.0)
        with pytest.raises(InvalidParameterError):
            ArxModel(a=[], b=[0.0], intercept=0.0)

    def test_round_trip_through_dict(self):
        model = support.TOTAL_TRUE
        again = ArxModel.from_dict(model.to_dict())
        assert np.array_equal(again.a, model.a)
        assert np.array_equal(again.b, model.b)
        assert again.intercept == model.intercept

    def test_dict_tag_checks(self):
        data = support.TOTAL_TRUE.to_dict()
        with pytest.raises(InvalidParameterError):
            ArxModel.from_dict({**data, "model": "vector_arx"})
        with pytest.raises(InvalidParameterError):
            ArxModel.from_dict({**data, "lag_orientation": "oldest_first"})
        with pytest.raises(InvalidParameterError):
            ArxModel.from_dict({**data, "k": 3})


class TestVectorModel:
    def test_shape_checks(self):
        with pytest.raises(InvalidParameterError):
            VectorArxModel(c=np.zeros((1, 23, 24)), h=np.zeros((2, 24, 24)),
                           intercept=np.zeros(24))
        with pytest.raises(InvalidParameterError):
            VectorArxModel(c=np.zeros((1, 24, 24)), h=np.zeros((3, 24, 24)),
                           intercept=np.zeros(24))
        with pytest.raises(InvalidParameterError):
            VectorArxModel(c=np.zeros((1, 24, 24)), h=np.zeros((2, 24, 24)),
                           intercept=np.zeros(23))

    def test_predict_window_orientation(self):
        # c[0] acts on the most recent shape row of a chronological window.
        c = np.zeros((2, 24, 24))
        c[0] = 2.0 * np.eye(24)
        model = VectorArxModel(c=c, h=np.zeros((3, 24, 24)),
                               intercept=np.zeros(24))
        shapes = np.vstack([np.full(24, 0.5), np.full(24, 1.5)])
        out = model.predict(shapes, np.zeros((3, 24)))
        assert np.allclose(out, 3.0)

    def test_predict_shape_clamps_and_renormalizes(self):
        raw = np.full(24, -1.0)
        raw[0], raw[1] = 3.0, 1.0
        model = VectorArxModel(c=np.zeros((1, 24, 24)),
                               h=np.zeros((2, 24, 24)), intercept=raw)
        u = predict_shape(model, np.zeros((1, 24)), np.zeros((2, 24)))
        assert np.all(u >= 0.0)
        assert u.sum() == pytest.approx(1.0)
        assert u[0] == pytest.approx(0.75)
        assert u[1] == pytest.approx(0.25)

    def test_all_negative_prediction_falls_back_to_uniform(self):
        model = VectorArxModel(c=np.zeros((1, 24, 24)),
                               h=np.zeros((2, 24, 24)),
                               intercept=-np.ones(24))
        u = model.predict_shape(np.zeros((1, 24)), np.zeros((2, 24)))
        assert np.allclose(u, 1.0 / 24)

    def test_round_trip_through_dict(self):
        model = support.build_vec_true()
        again = VectorArxModel.from_dict(model.to_dict())
        assert np.array_equal(again.c, model.c)
        assert np.array_equal(again.h, model.h)
        assert np.array_equal(again.intercept, model.intercept)


class TestFitTotal:
    def test_planted_noiseless_recovery(self):
        hist, _ = support.plant_total_history(
            support.TOTAL_TRUE, 60, np.random.default_rng(4001)
        )
        fit = fit_total_arx(hist, 2)
        assert np.allclose(fit.a, support.TOTAL_TRUE.a, atol=1e-9)
        assert np.allclose(fit.b, support.TOTAL_TRUE.b, atol=1e-9)
        assert fit.intercept == pytest.approx(20.0, abs=1e-7)

    def test_pure_autoregression(self):
        true = ArxModel(a=[0.8, -0.1], b=[0.0, 0.0, 0.0], intercept=5.0)
        hist, _ = support.plant_total_history(true, 80,
                                              np.random.default_rng(52))
        fit = fit_total_arx(hist, 2, exog=False)
        assert np.allclose(fit.a, true.a, atol=1e-9)
        assert np.array_equal(fit.b, np.zeros(3))
        assert fit.intercept == pytest.approx(5.0, abs=1e-7)

    def test_no_intercept_fit(self):
        fit = fit_total_arx(
            support.plant_total_history(
                support.TOTAL_TRUE, 60, np.random.default_rng(53)
            )[0],
            2,
            intercept=False,
        )
        assert fit.intercept == 0.0

    def test_least_squares_optimality(self):
        hist, _ = support.plant_total_history(
            support.TOTAL_TRUE, 100, np.random.default_rng(54), noise_sd=2.0
        )
        fit = fit_total_arx(hist, 2)
        totals = hist.totals()
        tbar = hist.daily_mean_temps()

        def sse(model: ArxModel) -> float:
            return sum(
                (model.predict(totals[d - 2:d], tbar[d - 2:d + 1])
                 - totals[d]) ** 2
                for d in range(2, hist.n_days)
            )

        base = sse(fit)
        for bump in (1e-3, -1e-3):
            perturbed = ArxModel(a=fit.a + [bump, 0.0], b=fit.b,
                                 intercept=fit.intercept)
            assert sse(perturbed) > base
            perturbed = ArxModel(a=fit.a, b=fit.b + [0.0, bump, 0.0],
                                 intercept=fit.intercept)
            assert sse(perturbed) > base
            perturbed = ArxModel(a=fit.a, b=fit.b,
                                 intercept=fit.intercept + bump)
            assert sse(perturbed) > base

    def test_data_margin(self):
        hist, _ = support.plant_total_history(
            support.TOTAL_TRUE, 12, np.random.default_rng(55)
        )
        assert fit_total_arx(hist, 2).k == 2
        with pytest.raises(InsufficientDataError):
            fit_total_arx(hist.head(11), 2)

    def test_order_validation(self):
        hist, _ = support.plant_total_history(
            support.TOTAL_TRUE, 30, np.random.default_rng(56)
        )
        with pytest.raises(InvalidParameterError):
            fit_total_arx(hist, 0)
        with pytest.raises(InvalidParameterError):
            fit_total_arx(hist, 2.5)

    def test_constant_series_with_intercept_is_singular(self):
        temps = support.make_temps_iid(39, np.random.default_rng(57))
        hist = LoadHistory(loads=np.full((40, 24), 2.0), temps=temps)
        with pytest.raises(SingularFitError) as err:
            fit_total_arx(hist, 1)
        assert "intercept" in str(err.value) or "p_lag" in str(err.value)

    def test_constant_series_without_intercept_fits(self):
        temps = support.make_temps_iid(39, np.random.default_rng(58))
        hist = LoadHistory(loads=np.full((40, 24), 2.0), temps=temps)
        fit = fit_total_arx(hist, 1, intercept=False, exog=False)
        assert fit.a[0] == pytest.approx(1.0)


class TestFitVector:
    def test_planted_noiseless_recovery(self):
        true = support.build_vec_true()
        seq, temps = support.plant_vector_sequence(
            true, 200, np.random.default_rng(4002)
        )
        fit = fit_vector_arx(seq, temps, 1)
        assert np.allclose(fit.c, true.c, atol=1e-9)
        assert np.allclose(fit.h, true.h, atol=1e-9)
        assert np.allclose(fit.intercept, 0.0)

    def test_data_requirement(self):
        rng = np.random.default_rng(61)
        with pytest.raises(InsufficientDataError):
            fit_vector_arx(rng.normal(1.0, 0.1, (72, 24)),
                           rng.normal(14.0, 3.0, (72, 24)), 1)

    def test_input_shapes_checked(self):
        rng = np.random.default_rng(62)
        with pytest.raises(InvalidParameterError):
            fit_vector_arx(rng.normal(size=(100, 23)),
                           rng.normal(size=(100, 24)), 1)
        with pytest.raises(InvalidParameterError):
            fit_vector_arx(rng.normal(size=(100, 24)),
                           rng.normal(size=(80, 24)), 1)

    def test_shape_fit_margin(self):
        rng = np.random.default_rng(63)
        loads = rng.uniform(0.5, 1.5, (147, 24))
        hist = LoadHistory(loads=loads, temps=rng.normal(14, 3, (147, 24)))
        with pytest.raises(InsufficientDataError):
            fit_shape_varx(hist, 1)

    def test_constant_shape_is_singular(self):
        # Every shape row equal makes each lag column constant.
        rng = np.random.default_rng(64)
        shape = np.full(24, 1.0 / 24)
        totals = rng.uniform(50.0, 150.0, 150)
        hist = LoadHistory(loads=np.outer(totals, shape),
                           temps=rng.normal(14.0, 3.0, (150, 24)))
        with pytest.raises(SingularFitError):
            fit_shape_varx(hist, 1)

    def test_simplex_data_with_intercept_is_singular(self, small_history):
        # Shape rows sum to one, so the lag block spans the constant column.
        with pytest.raises(SingularFitError):
            fit_shape_varx(small_history.head(200), 1, intercept=True)


class TestForecastDay:
    def _tiny(self, intercept_total: float) -> tuple:
        total = ArxModel(a=[0.0], b=[0.0, 0.0], intercept=intercept_total)
        raw = np.zeros(24)
        raw[:4] = [4.0, 3.0, 2.0, 1.0]
        shape = VectorArxModel(c=np.zeros((1, 24, 24)),
                               h=np.zeros((2, 24, 24)), intercept=raw)
        hist = LoadHistory(loads=np.ones((1, 24)), temps=np.ones((2, 24)))
        return total, shape, hist

    def test_total_identity_holds(self):
        total, shape, hist = self._tiny(10.0)
        profile = forecast_day(total, shape, hist)
        assert float(np.sum(profile)) == pytest.approx(10.0, abs=1e-12)
        assert profile[0] == pytest.approx(4.0)

    def test_negative_total_passes_through(self):
        total, shape, hist = self._tiny(-5.0)
        profile = forecast_day(total, shape, hist)
        assert float(np.sum(profile)) == pytest.approx(-5.0, abs=1e-12)

    def test_requires_forecast_temps(self):
        total, shape, _ = self._tiny(1.0)
        hist = LoadHistory(loads=np.ones((1, 24)), temps=np.ones((1, 24)))
        with pytest.raises(InsufficientDataError):
            forecast_day(total, shape, hist)

    def test_requires_enough_lag_days(self):
        total = ArxModel(a=[0.1, 0.1], b=np.zeros(3), intercept=1.0)
        shape = VectorArxModel(c=np.zeros((1, 24, 24)),
                               h=np.zeros((2, 24, 24)), intercept=np.ones(24))
        hist = LoadHistory(loads=np.ones((1, 24)), temps=np.ones((2, 24)))
        with pytest.raises(InsufficientDataError):
            forecast_day(total, shape, hist)

    def test_composed_planted_recovery(self):
        """Fit both models on a history simulated inside the model class and
        forecast the withheld next day; the error must be at noise floor."""
        rng = np.random.default_rng(4500)
        n_days = 400
        days = np.arange(n_days + 2)
        tbar = 14.0 + 8.0 * np.sin(2 * np.pi * (days + 80) / 365.0) \
            + rng.normal(0.0, 1.5, n_days + 2)
        diurnal = -np.cos(2 * np.pi * (np.arange(24) - 3) / 24)
        temps = tbar[:, None] + 4.0 * diurnal[None, :] \
            + rng.normal(0.0, 1.0, (n_days + 2, 24))

        total_true = ArxModel(a=[0.55, 0.2], b=[0.08, -0.03, 0.015],
                              intercept=20.0)
        eye, ones = np.eye(24), np.ones((24, 24))
        center = eye - ones / 24.0
        # Columns of c sum to one and of h to zero, so the planted recursion
        # stays on the simplex and the loads stay valid.
        shape_true = VectorArxModel(
            c=[0.55 * eye + 0.45 / 24.0 * ones],
            h=[2e-5 * center @ rng.normal(0.0, 1.0, (24, 24)),
               1e-5 * center @ rng.normal(0.0, 1.0, (24, 24))],
            intercept=np.zeros(24),
        )

        tbar_all = temps.mean(axis=1)
        p = np.empty(n_days + 1)
        u = np.empty((n_days + 1, 24))
        p[:2] = 100.0 + rng.normal(0.0, 5.0, 2)
        u[0] = u[1] = np.full(24, 1.0 / 24)
        for d in range(2, n_days + 1):
            p[d] = total_true.predict(p[d - 2:d], tbar_all[d - 2:d + 1])
        for d in range(1, n_days + 1):
            u[d] = shape_true.predict(u[d - 1:d], temps[d - 1:d + 1])
        assert u.min() > 0.0

        hist = LoadHistory(loads=p[:n_days, None] * u[:n_days],
                           temps=temps[:n_days + 1])
        total_fit = fit_total_arx(hist, 2)
        shape_fit = fit_shape_varx(hist, 1)
        profile = forecast_day(total_fit, shape_fit, hist)
        truth = p[n_days] * u[n_days]
        assert np.max(np.abs(profile - truth) / truth) < 1e-4

        p_hat = total_fit.predict(hist.totals()[-2:],
                                  hist.daily_mean_temps()[-3:])
        assert float(np.sum(profile)) == pytest.approx(p_hat, abs=1e-10)


class TestOneStepForecasts:
    def test_matches_manual_loop(self, small_history):
        hist = small_history.head(180)
        total = fit_total_arx(hist, 2)
        shape = fit_shape_varx(hist, 1)
        pred = one_step_forecasts(small_history, total, shape, 180, 190)
        assert pred.shape == (10, 24)
        totals = small_history.totals()
        shapes = small_history.shapes()
        tbar = small_history.daily_mean_temps()
        for i, day in enumerate(range(180, 190)):
            p_hat = total.predict(totals[day - 2:day], tbar[day - 2:day + 1])
            u_hat = shape.predict_shape(shapes[day - 1:day],
                                        small_history.temps[day - 1:day + 1])
            assert np.allclose(pred[i], p_hat * u_hat)

    def test_bounds_checked(self, small_history):
        hist = small_history.head(180)
        total = fit_total_arx(hist, 2)
        shape = fit_shape_varx(hist, 1)
        with pytest.raises(InvalidParameterError):
            one_step_forecasts(small_history, total, shape, 1, 10)
        with pytest.raises(InvalidParameterError):
            one_step_forecasts(small_history, total, shape, 200, 200)
        with pytest.raises(InvalidParameterError):
            one_step_forecasts(small_history, total, shape, 180, 500)


class TestOrderSelection:
    def _noisy_planted(self, seed: int, n_days: int = 400) -> LoadHistory:
        _, clean = support.plant_total_history(
            support.TOTAL_TRUE, n_days, np.random.default_rng([4300, seed])
        )
        hist, _ = support.plant_total_history(
            support.TOTAL_TRUE, n_days, np.random.default_rng([4300, seed]),
            noise_sd=float(np.std(clean)) / 10.0,
        )
        return hist

    def test_single_candidate(self):
        result = cross_validate_order(self._noisy_planted(0), [3])
        assert isinstance(result, CvResult)
        assert result.best_k == 3
        assert set(result.scores) == {3}
        assert result.skipped == ()
        assert result.target == "total"

    def test_selects_planted_order_in_majority(self):
        picks = [cross_validate_order(self._noisy_planted(s),
                                      [1, 2, 3, 7]).best_k
                 for s in range(9)]
        assert picks.count(2) >= 6

    def test_white_noise_prefers_smallest_in_majority(self):
        picks = []
        for seed in range(9):
            rng = np.random.default_rng([4400, seed])
            temps = support.make_temps_iid(400, rng)
            totals = np.abs(100.0 + rng.normal(0.0, 10.0, 400))
            hist = LoadHistory(loads=totals[:, None] / 24 * np.ones(24),
                               temps=temps)
            picks.append(cross_validate_order(hist, [1, 2, 3, 7], n_folds=10,
                                              val_fraction=0.3).best_k)
        assert picks.count(1) >= 5

    def test_unfittable_candidate_skipped(self):
        result = cross_validate_order(self._noisy_planted(1), [1, 150])
        assert result.best_k == 1
        assert 150 not in result.scores
        assert len(result.skipped) == 1
        assert result.skipped[0][0] == 150

    def test_all_candidates_unfittable(self):
        with pytest.raises(InsufficientDataError):
            cross_validate_order(self._noisy_planted(2, n_days=100), [150])

    def test_profile_target(self, small_history):
        result = cross_validate_order(small_history, [1, 2], n_folds=2,
                                      target="profile")
        assert result.target == "profile"
        assert result.best_k in (1, 2)
        assert set(result.scores) == {1, 2}

    def test_parameter_validation(self, small_history):
        with pytest.raises(InvalidParameterError):
            cross_validate_order(small_history, [1], target="daily")
        with pytest.raises(InvalidParameterError):
            cross_validate_order(small_history, [])
        with pytest.raises(InvalidParameterError):
            cross_validate_order(small_history, [0, 1])
        with pytest.raises(InvalidParameterError):
            cross_validate_order(small_history, [1], n_folds=0)
        with pytest.raises(InvalidParameterError):
            cross_validate_order(small_history, [1], val_fraction=1.5)
        with pytest.raises(InsufficientDataError):
            cross_validate_order(small_history.head(160), [1],
                                 val_fraction=0.999)
