"""Forecast accuracy metrics and rolling-origin backtesting.

Model comparisons are made on one-day-ahead forecasts: for every day in the
evaluation window the model sees history up to 05:00 and is scored on the
next 24 hours, then per-day scores are averaged. Averaging per day first
keeps a single catastrophic day visible instead of letting it drown in a
month of pooled hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Callable, Mapping

from .baselines import HOURS_PER_DAY, SeasonalMaConfig, ensemble, seasonal_ma_forecast
from .demand import HourlySeries, PlanningClock, hour_index, planning_day_start
from .tbats import TbatsModel, tbats_filter, tbats_forecast

Forecaster = Callable[[HourlySeries, int], HourlySeries]
"""(training history, horizon hours) -> forecast starting at history.end."""


def tbats_forecaster(model: TbatsModel) -> Forecaster:
    """Day-ahead forecasts from a fixed fitted model.

    Parameters stay frozen (the monthly-refit regime); only the state is
    refreshed by filtering the training window, which must start where the
    model was trained.
    """

    def forecast(train: HourlySeries, horizon: int) -> HourlySeries:
        if train.origin != model.train_origin:
            raise ValueError(
                f"training window starts at {train.origin}, "
                f"model was initialized at {model.train_origin}"
            )
        state = tbats_filter(model, train).states[-1]
        return tbats_forecast(model, horizon, state=state, origin=train.end)

    return forecast


def ma_forecaster(days: int = 3) -> Forecaster:
    """Same-hour mean of the previous ``days`` days."""
    config = SeasonalMaConfig(period=HOURS_PER_DAY, window=days)

    def forecast(train: HourlySeries, horizon: int) -> HourlySeries:
        return seasonal_ma_forecast(train, config, horizon)

    return forecast


def ensemble_forecaster(first: Forecaster, second: Forecaster) -> Forecaster:
    def forecast(train: HourlySeries, horizon: int) -> HourlySeries:
        return ensemble(first(train, horizon), second(train, horizon))

    return forecast


@dataclass(frozen=True)
class AccuracyReport:
    """RMSE/MAE/MAPE over one forecast window.

    ``mape`` is None when no hour had a positive actual; ``mape_excluded``
    counts the zero-actual hours left out of it.
    """

    rmse: float
    mae: float
    mape: float | None
    horizon: int
    n_points: int
    mape_excluded: int = 0


def evaluate(forecast: HourlySeries, actual: HourlySeries) -> AccuracyReport:
    """Score a forecast against aligned actuals."""
    if forecast.origin != actual.origin or len(forecast) != len(actual):
        raise ValueError(
            f"series are not aligned: [{forecast.origin}, {len(forecast)}h) vs "
            f"[{actual.origin}, {len(actual)}h)"
        )
    n = len(forecast)
    if n == 0:
        raise ValueError("cannot evaluate an empty window")
    sq = 0.0
    ab = 0.0
    pct = 0.0
    n_pos = 0
    for f, a in zip(forecast.values, actual.values):
        err = f - a
        sq += err * err
        ab += abs(err)
        if a > 0:
            pct += abs(err) / a
            n_pos += 1
    return AccuracyReport(
        rmse=math.sqrt(sq / n),
        mae=ab / n,
        mape=pct / n_pos if n_pos else None,
        horizon=n,
        n_points=n,
        mape_excluded=n - n_pos,
    )


@dataclass(frozen=True)
class BacktestResult:
    """Per-day scores for one model over the evaluation window."""

    model: str
    daily: tuple[tuple[date, AccuracyReport], ...]
    failures: tuple[date, ...]

    def _mean(self, pick) -> float | None:
        values = [v for v in (pick(r) for _, r in self.daily) if v is not None]
        return sum(values) / len(values) if values else None

    @property
    def rmse(self) -> float | None:
        return self._mean(lambda r: r.rmse)

    @property
    def mae(self) -> float | None:
        return self._mean(lambda r: r.mae)

    @property
    def mape(self) -> float | None:
        return self._mean(lambda r: r.mape)

    @property
    def days_evaluated(self) -> int:
        return len(self.daily)


def backtest(
    history: HourlySeries,
    models: Mapping[str, Forecaster],
    window_days: int = 30,
    horizon_hours: int = HOURS_PER_DAY,
    clock: PlanningClock | None = None,
) -> dict[str, BacktestResult]:
    """Rolling-origin evaluation over the last ``window_days`` of history.

    Each day the model receives everything before that day's 05:00 start
    and forecasts ``horizon_hours`` ahead; a model that raises on a day has
    the day recorded under ``failures`` and excluded from its averages.
    """
    clock = clock or PlanningClock()
    if window_days < 1:
        raise ValueError(f"window_days must be >= 1, got {window_days}")
    last_day, _ = hour_index(history.end - timedelta(hours=horizon_hours), clock)
    origins: list[datetime] = []
    for back in range(window_days - 1, -1, -1):
        start = planning_day_start(last_day - timedelta(days=back), clock)
        if start <= history.origin:
            raise ValueError(
                f"not enough history: day {back + 1} from the end has no "
                f"training data before {start}"
            )
        if start + timedelta(hours=horizon_hours) > history.end:
            raise ValueError("history too short for the requested horizon")
        origins.append(start)

    results: dict[str, BacktestResult] = {}
    for name, model in models.items():
        daily: list[tuple[date, AccuracyReport]] = []
        failures: list[date] = []
        for start in origins:
            day, _ = hour_index(start, clock)
            train = history.window(
                history.origin,
                int((start - history.origin) / timedelta(hours=1)),
            )
            actual = history.window(start, horizon_hours)
            try:
                forecast = model(train, horizon_hours)
            except Exception:
                failures.append(day)
                continue
            daily.append((day, evaluate(forecast, actual)))
        results[name] = BacktestResult(
            model=name, daily=tuple(daily), failures=tuple(failures)
        )
    return results
