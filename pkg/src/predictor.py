"""
Gaussian price prediction: a moving-average mean shared by every lookahead,
and a standard deviation filtered from the same day-frame window on previous days
(one day, two days and one week back).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import DEFAULT_FILTER_K, DEFAULT_SEED
from src.errors import DomainError, PredictionError
from src.model import PriceTrace

logger = logging.getLogger(__name__)

HISTORY_OFFSETS = (1, 2, 7)


class PredictionMode(str, Enum):
    SAMPLED = "sampled"
    MEAN_ONLY = "mean_only"
    ORACLE = "oracle"

    @classmethod
    def parse(cls, value) -> 'PredictionMode':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).replace("-", "_"))
        except ValueError:
            raise DomainError(f"Unknown prediction mode '{value}'")


@dataclass(frozen=True)
class PredictionModel:
    """
    ma_coefficients are most-recent-first weights eps_1..eps_{D+1} with intercept ma_intercept;
    None means the simple moving average. fit_ma refits them per location from the previous day.
    """
    ma_coefficients: Optional[Tuple[float, ...]] = None
    ma_intercept: float = 0.0
    filter: Tuple[float, float, float] = DEFAULT_FILTER_K
    rng_seed: int = DEFAULT_SEED
    mode: PredictionMode = PredictionMode.SAMPLED
    fit_ma: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'mode', PredictionMode.parse(self.mode))
        if len(self.filter) != 3 or any(k < 0 for k in self.filter):
            raise DomainError(f"filter weights (k1, k2, k7) must be three nonnegative numbers, got {self.filter}")
        object.__setattr__(self, 'filter', tuple(float(k) for k in self.filter))
        if self.ma_coefficients is not None:
            coeffs = tuple(float(c) for c in self.ma_coefficients)
            if not np.all(np.isfinite(coeffs)) or not np.isfinite(self.ma_intercept):
                raise DomainError("moving-average coefficients must be finite")
            object.__setattr__(self, 'ma_coefficients', coeffs)
        if self.rng_seed < 0:
            raise DomainError("rng_seed must be nonnegative")

    def to_dict(self):
        return {
            "mode": self.mode.value,
            "filter": list(self.filter),
            "rng_seed": self.rng_seed,
            "ma_coefficients": list(self.ma_coefficients) if self.ma_coefficients else None,
            "ma_intercept": self.ma_intercept,
            "fit_ma": self.fit_ma,
        }


@dataclass(frozen=True, eq=False)
class PricePrediction:
    """Arrays over lookaheads k = 1..D (trailing axis); sampled_beta is what the optimizers see."""
    mean: np.ndarray
    sigma: np.ndarray
    sampled_beta: np.ndarray

    @property
    def horizon(self) -> int:
        return self.mean.shape[-1]

    @classmethod
    def stack(cls, rows: Sequence['PricePrediction']) -> 'PricePrediction':
        return cls(np.stack([r.mean for r in rows]), np.stack([r.sigma for r in rows]),
                   np.stack([r.sampled_beta for r in rows]))

    @classmethod
    def exact(cls, future: np.ndarray) -> 'PricePrediction':
        future = np.asarray(future, dtype=float)
        return cls(future, np.zeros_like(future), future)


def predict_mean(history: Sequence[float], D: int, coeffs: Optional[Sequence[float]] = None,
                 intercept: float = 0.0) -> np.ndarray:
    """
    Moving-average mean over the last D+1 prices (oldest first in `history`), repeated for the
    D lookaheads. With fewer than D+1 prices the last observed price is used.
    """
    values = np.asarray(history, dtype=float)
    if values.size == 0:
        raise PredictionError("cannot predict a mean from an empty price history")
    if values.size < D + 1:
        return np.full(D, values[-1])
    window = values[values.size - (D + 1):]
    if coeffs is None:
        mu = float(window.mean()) + intercept
    else:
        weights = np.asarray(coeffs, dtype=float)
        if weights.shape != (D + 1,):
            raise DomainError(f"need {D + 1} moving-average coefficients, got {weights.size}")
        mu = intercept + float(weights @ window[::-1])
    return np.full(D, mu)


def predict_sigma(prev_day_sigma: float, two_days_sigma: float, week_sigma: float,
                  filter: Tuple[float, float, float] = DEFAULT_FILTER_K) -> float:
    if min(prev_day_sigma, two_days_sigma, week_sigma) < 0:
        raise DomainError("history standard deviations must be nonnegative")
    k1, k2, k7 = filter
    return k1 * prev_day_sigma + k2 * two_days_sigma + k7 * week_sigma


def history_sigma(day_series: Sequence[float]) -> float:
    """Sample standard deviation (n-1 denominator)."""
    values = np.asarray(day_series, dtype=float)
    if values.size < 2:
        raise PredictionError(f"need at least 2 prices for a standard deviation, got {values.size}")
    return float(np.std(values, ddof=1))


def day_window(day: np.ndarray, kappa: int, D: int) -> np.ndarray:
    """Prices at day-frame slots kappa-D..kappa of one day, wrapping inside the day."""
    idx = np.arange(kappa - D, kappa + 1) % day.shape[0]
    return day[idx]


def fit_ma_coefficients(day_series: Sequence[float], D: int) -> Tuple[float, Tuple[float, ...]]:
    """
    Least-squares fit of one-step-ahead prediction over one day:
    beta[m] ~ eps_0 + sum_k eps_k beta[m-k], k = 1..D+1. Falls back to the simple moving
    average when the day is too short to fit.
    """
    values = np.asarray(day_series, dtype=float)
    width = D + 1
    rows = values.size - width
    if rows < width + 1:
        return 0.0, tuple([1.0 / width] * width)
    features = np.column_stack([np.ones(rows)] + [values[width - k:values.size - k] for k in range(1, width + 1)])
    target = values[width:]
    solution, *_ = np.linalg.lstsq(features, target, rcond=None)
    return float(solution[0]), tuple(float(v) for v in solution[1:])


def sample_price(mean: float, sigma: float, seed: int, i: int, t: int, k: int) -> float:
    """One draw from Normal(mean, sigma) on the stream (seed, i, t, k), clamped at 0."""
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    if sigma == 0:
        return max(float(mean), 0.0)
    rng = np.random.default_rng([seed, i, t, k])
    return max(float(rng.normal(mean, sigma)), 0.0)


def _filtered_sigma(model: PredictionModel, prices: PriceTrace, i: int, t: int, k: int, D: int) -> Optional[float]:
    kappa = prices.day_frame_slot(t + k)
    sigmas = []
    for offset, weight in zip(HISTORY_OFFSETS, model.filter):
        day = prices.history_for(offset)
        if day is None:
            if weight > 0:
                return None
            sigmas.append(0.0)
            continue
        sigmas.append(history_sigma(day_window(day[i], kappa, D)) if D >= 1 else 0.0)
    return predict_sigma(*sigmas, filter=model.filter)


def predict(model: PredictionModel, prices: PriceTrace, i: int, t: int, D: int,
            lookahead: Optional[int] = None) -> PricePrediction:
    """
    Prices for slots t+1..t+lookahead at location i (lookahead defaults to D; the mean and
    deviation windows always use D). Oracle mode returns the true prices.
    """
    lookahead = D if lookahead is None else min(lookahead, D)
    if model.mode == PredictionMode.ORACLE:
        if t + lookahead >= prices.T:
            raise PredictionError(f"oracle prediction for slot {t + lookahead} beyond trace end {prices.T - 1}")
        return PricePrediction.exact(prices.beta[i, t + 1:t + lookahead + 1])

    recent = prices.recent(i, t, D + 1)
    coeffs, intercept = model.ma_coefficients, model.ma_intercept
    if model.fit_ma and prices.history_for(1) is not None:
        intercept, coeffs = fit_ma_coefficients(prices.history_for(1)[i], D)
    if coeffs is not None and len(coeffs) != D + 1:
        raise DomainError(f"need {D + 1} moving-average coefficients, got {len(coeffs)}")
    mean = predict_mean(recent, D, coeffs, intercept)[:lookahead]
    mean = np.maximum(mean, 0.0)

    sigma = np.zeros(lookahead)
    fallback = None
    for k in range(1, lookahead + 1):
        value = _filtered_sigma(model, prices, i, t, k, D)
        if value is None:
            if fallback is None:
                fallback = history_sigma(recent) if recent.size >= 2 else 0.0
            value = fallback
        sigma[k - 1] = value

    if model.mode == PredictionMode.MEAN_ONLY:
        sampled = mean.copy()
    else:
        sampled = np.array([sample_price(mean[k - 1], sigma[k - 1], model.rng_seed, i, t, k)
                            for k in range(1, lookahead + 1)])
    return PricePrediction(mean, sigma, sampled)


def predict_all(model: PredictionModel, prices: PriceTrace, t: int, D: int,
                lookahead: Optional[int] = None) -> PricePrediction:
    """Stacked predictions for every location, arrays shaped (n, lookahead)."""
    return PricePrediction.stack([predict(model, prices, i, t, D, lookahead) for i in range(prices.n)])


def relative_error(predicted: np.ndarray, actual: np.ndarray) -> float:
    """max |predicted - actual| / actual over slots with a positive actual price; 0 when none."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    positive = actual > 0
    if not np.any(positive):
        return 0.0
    return float(np.max(np.abs(predicted[positive] - actual[positive]) / actual[positive]))


def chebyshev_bound(sigma: float, eps: float) -> float:
    """Upper bound on P(|prediction error| >= eps) for a deviation sigma."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    return min(1.0, sigma ** 2 / eps ** 2)
