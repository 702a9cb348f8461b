"""Reference forecasters: hour-of-day moving average, seasonal moving
average, and the equally weighted ensemble."""

from __future__ import annotations

from dataclasses import dataclass

from .demand import HourlySeries

HOURS_PER_DAY = 24


@dataclass(frozen=True)
class SeasonalMaConfig:
    period: int = 168
    window: int = 4

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


def moving_average_forecast(series: HourlySeries, periods: int = 3) -> HourlySeries:
    """Next-day forecast: each hour is the mean of the same hour on the
    previous ``periods`` days."""
    if periods < 1:
        raise ValueError(f"periods must be >= 1, got {periods}")
    n = len(series)
    if n < periods * HOURS_PER_DAY:
        raise ValueError(
            f"need at least {periods} days of history, got {n / HOURS_PER_DAY:.1f}"
        )
    values = series.values
    out = []
    for h in range(HOURS_PER_DAY):
        out.append(
            sum(values[n + h - j * HOURS_PER_DAY] for j in range(1, periods + 1))
            / periods
        )
    return HourlySeries(series.end, tuple(out))


def seasonal_ma_forecast(
    series: HourlySeries,
    config: SeasonalMaConfig | None = None,
    horizon: int = HOURS_PER_DAY,
) -> HourlySeries:
    """Forecast each future hour as the mean of the last ``window``
    historical observations at the same seasonal position."""
    config = config or SeasonalMaConfig()
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n = len(series)
    if n < config.window * config.period:
        raise ValueError(
            f"need at least window*period = {config.window * config.period} "
            f"hours of history, got {n}"
        )
    values = series.values
    period, window = config.period, config.window
    out = []
    for i in range(horizon):
        phase = (n + i) % period
        # most recent historical index at this phase
        last = phase + ((n - 1 - phase) // period) * period
        out.append(
            sum(values[last - j * period] for j in range(window)) / window
        )
    return HourlySeries(series.end, tuple(out))


def ensemble(f1: HourlySeries, f2: HourlySeries) -> HourlySeries:
    """Pointwise mean of two aligned forecasts."""
    if f1.origin != f2.origin or len(f1) != len(f2):
        raise ValueError(
            f"forecasts are not aligned: [{f1.origin}, {len(f1)}h) vs "
            f"[{f2.origin}, {len(f2)}h)"
        )
    return HourlySeries(
        f1.origin, tuple((a + b) / 2.0 for a, b in zip(f1.values, f2.values))
    )
