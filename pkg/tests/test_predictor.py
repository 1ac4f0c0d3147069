from __future__ import annotations

import numpy as np
import pytest

from src.errors import DomainError, PredictionError
from src.model import PriceTrace
from src.predictor import (
    PredictionMode, PredictionModel, PricePrediction, chebyshev_bound, day_window, fit_ma_coefficients,
    history_sigma, predict, predict_all, predict_mean, predict_sigma, relative_error, sample_price,
)


def _trace(beta, history=None):
    return PriceTrace(np.atleast_2d(np.asarray(beta, dtype=float)), history or {})


class TestMean:
    def test_simple_moving_average_over_last_d_plus_one(self):
        assert predict_mean([9.0, 1.0, 2.0, 3.0], 2).tolist() == [2.0, 2.0]

    def test_short_history_uses_last_price(self):
        assert predict_mean([4.0, 6.0], 3).tolist() == [6.0, 6.0, 6.0]

    def test_weighted_most_recent_first(self):
        mean = predict_mean([1.0, 2.0, 3.0], 2, coeffs=[0.5, 0.3, 0.2], intercept=1.0)
        assert mean == pytest.approx([1.0 + 0.5 * 3 + 0.3 * 2 + 0.2 * 1] * 2)

    def test_empty_history(self):
        with pytest.raises(PredictionError):
            predict_mean([], 2)

    def test_wrong_coefficient_count(self):
        with pytest.raises(DomainError):
            predict_mean([1.0, 2.0, 3.0], 2, coeffs=[1.0])


class TestSigma:
    def test_filter_arithmetic_is_exact(self):
        a, b, c = 1.7, 2.9, 0.35
        assert predict_sigma(a, b, c) == 0.837 * a + 0.142 * c

    def test_custom_filter(self):
        assert predict_sigma(1.0, 2.0, 3.0, filter=(0.5, 0.25, 0.25)) == pytest.approx(1.75)

    def test_negative_history_sigma(self):
        with pytest.raises(DomainError):
            predict_sigma(-1.0, 0.0, 0.0)

    def test_sample_std(self):
        assert history_sigma([1.0, 2.0, 3.0, 4.0]) == pytest.approx(np.std([1, 2, 3, 4], ddof=1))

    def test_sample_std_needs_two_values(self):
        with pytest.raises(PredictionError):
            history_sigma([5.0])

    def test_day_window_wraps(self):
        day = np.arange(10.0)
        assert day_window(day, 1, 3).tolist() == [8.0, 9.0, 0.0, 1.0]


class TestSampling:
    def test_draw_statistics(self):
        draws = np.array([sample_price(10.0, 2.0, 1234, 0, 0, k) for k in range(10_000)])
        assert abs(draws.mean() - 10.0) < 0.1
        assert abs(draws.std(ddof=1) - 2.0) < 0.1

    def test_streams_are_reproducible_and_distinct(self):
        assert sample_price(10.0, 2.0, 5, 1, 2, 3) == sample_price(10.0, 2.0, 5, 1, 2, 3)
        assert sample_price(10.0, 2.0, 5, 1, 2, 3) != sample_price(10.0, 2.0, 5, 1, 2, 4)

    def test_negative_draws_clamped(self):
        assert all(sample_price(-50.0, 1.0, 1, 0, 0, k) == 0.0 for k in range(20))

    def test_zero_sigma_returns_mean(self):
        assert sample_price(3.5, 0.0, 1, 0, 0, 1) == 3.5


class TestPredict:
    def test_oracle_returns_true_future(self):
        prices = _trace([1.0, 2.0, 3.0, 4.0])
        model = PredictionModel(mode=PredictionMode.ORACLE)
        prediction = predict(model, prices, 0, 1, 2)
        assert prediction.sampled_beta.tolist() == [3.0, 4.0]
        assert prediction.sigma.tolist() == [0.0, 0.0]

    def test_oracle_beyond_trace(self):
        model = PredictionModel(mode=PredictionMode.ORACLE)
        with pytest.raises(PredictionError):
            predict(model, _trace([1.0, 2.0]), 0, 1, 2)

    def test_flat_history_gives_exact_prediction(self):
        history = {offset: np.full((1, 8), 4.0) for offset in (1, 2, 7)}
        prices = _trace(np.full(8, 4.0), history)
        prediction = predict(PredictionModel(), prices, 0, 3, 2)
        assert prediction.mean.tolist() == [4.0, 4.0]
        assert prediction.sigma.tolist() == [0.0, 0.0]
        assert prediction.sampled_beta.tolist() == [4.0, 4.0]

    def test_sigma_uses_history_filter(self):
        day = np.array([[1.0, 3.0, 1.0, 3.0, 1.0, 3.0]])
        week = np.array([[0.0, 2.0, 4.0, 0.0, 2.0, 4.0]])
        prices = PriceTrace(np.full((1, 6), 2.0), {1: day, 2: day, 7: week}, slot_length=14400)
        prediction = predict(PredictionModel(mode=PredictionMode.MEAN_ONLY), prices, 0, 2, 1, lookahead=1)
        # window at day-frame slot 3 with D = 1 covers slots 2 and 3
        expected = 0.837 * history_sigma([1.0, 3.0]) + 0.142 * history_sigma([4.0, 0.0])
        assert prediction.sigma[0] == pytest.approx(expected)
        assert prediction.sampled_beta.tolist() == prediction.mean.tolist()

    def test_cold_start_falls_back_to_recent_prices(self):
        prices = _trace([2.0, 4.0, 6.0, 8.0])
        prediction = predict(PredictionModel(mode=PredictionMode.MEAN_ONLY), prices, 0, 2, 2)
        assert prediction.sigma == pytest.approx([2.0, 2.0])
        assert prediction.mean == pytest.approx([4.0, 4.0])

    def test_sampled_mode_is_seeded(self):
        history = {offset: np.tile([[1.0, 5.0]], (1, 4)) for offset in (1, 2, 7)}
        prices = _trace([3.0] * 8, history)
        model = PredictionModel(rng_seed=11)
        first = predict(model, prices, 0, 4, 2)
        second = predict(model, prices, 0, 4, 2)
        assert first.sampled_beta.tolist() == second.sampled_beta.tolist()
        assert np.all(first.sigma > 0)

    def test_predict_all_stacks_locations(self):
        prices = PriceTrace(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        prediction = predict_all(PredictionModel(mode=PredictionMode.ORACLE), prices, 0, 2)
        assert prediction.sampled_beta.tolist() == [[2.0, 3.0], [5.0, 6.0]]
        assert prediction.horizon == 2

    def test_fitted_moving_average_recovers_linear_rule(self):
        # beta[m] = 1 + 0.5 beta[m-1] + noise
        rng = np.random.default_rng(3)
        series = [2.0]
        for _ in range(1999):
            series.append(1.0 + 0.5 * series[-1] + rng.normal(0, 1.0))
        intercept, coeffs = fit_ma_coefficients(series, 0)
        assert intercept == pytest.approx(1.0, abs=0.2)
        assert coeffs[0] == pytest.approx(0.5, abs=0.1)

    def test_fit_falls_back_on_short_day(self):
        assert fit_ma_coefficients([1.0, 2.0, 3.0], 2) == (0.0, (1 / 3, 1 / 3, 1 / 3))


class TestModel:
    def test_mode_parse_accepts_dashes(self):
        assert PredictionMode.parse("mean-only") is PredictionMode.MEAN_ONLY
        with pytest.raises(DomainError):
            PredictionMode.parse("psychic")

    def test_rejects_negative_filter_weight(self):
        with pytest.raises(DomainError):
            PredictionModel(filter=(1.0, -0.1, 0.0))

    def test_to_dict(self):
        data = PredictionModel(rng_seed=3, mode="oracle").to_dict()
        assert data["mode"] == "oracle"
        assert data["filter"] == [0.837, 0.0, 0.142]


class TestErrorMeasures:
    def test_relative_error_skips_zero_prices(self):
        assert relative_error([1.0, 5.0, 2.0], [0.0, 4.0, 2.0]) == pytest.approx(0.25)
        assert relative_error([1.0], [0.0]) == 0.0

    def test_chebyshev(self):
        assert chebyshev_bound(1.0, 2.0) == 0.25
        assert chebyshev_bound(3.0, 1.0) == 1.0
        with pytest.raises(DomainError):
            chebyshev_bound(1.0, 0.0)

    def test_exact_prediction(self):
        exact = PricePrediction.exact([1.0, 2.0])
        assert exact.sigma.tolist() == [0.0, 0.0]
        assert exact.sampled_beta.tolist() == [1.0, 2.0]
