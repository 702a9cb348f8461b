import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fleetplan.baselines import (
    SeasonalMaConfig,
    ensemble,
    moving_average_forecast,
    seasonal_ma_forecast,
)
from fleetplan.demand import HOUR, HourlySeries

from helpers import ORIGIN


def series_from(values) -> HourlySeries:
    return HourlySeries(ORIGIN, tuple(float(v) for v in values))


class TestMovingAverage:
    def test_three_identical_days(self):
        day = [float(5 + (h % 7)) for h in range(24)]
        forecast = moving_average_forecast(series_from(day * 3))
        assert forecast.values == tuple(day)
        assert forecast.origin == ORIGIN + 72 * HOUR

    def test_arithmetic_example(self):
        values = [3.0] * 24 + [6.0] * 24 + [9.0] * 24
        forecast = moving_average_forecast(series_from(values))
        assert forecast.values == (6.0,) * 24

    def test_matches_loop_oracle(self):
        rng = random.Random(4)
        values = [rng.uniform(0, 20) for _ in range(24 * 9)]
        forecast = moving_average_forecast(series_from(values))
        for h in range(24):
            expected = (
                values[24 * 8 + h] + values[24 * 7 + h] + values[24 * 6 + h]
            ) / 3
            assert forecast.values[h] == pytest.approx(expected, rel=1e-12)

    def test_insufficient_history(self):
        with pytest.raises(ValueError, match="at least 3 days"):
            moving_average_forecast(series_from([1.0] * 71))


class TestSeasonalMovingAverage:
    def test_periodic_series_reproduced(self):
        week = [float((h * 13) % 11) for h in range(168)]
        series = series_from(week * 4)
        forecast = seasonal_ma_forecast(series, horizon=168)
        assert forecast.values == pytest.approx(tuple(week))

    def test_position_mean_example(self):
        # same position valued 1, 2, 3, 4 over four weeks
        values = []
        for w in (1.0, 2.0, 3.0, 4.0):
            values.extend([w] * 168)
        forecast = seasonal_ma_forecast(series_from(values), horizon=24)
        assert forecast.values == (2.5,) * 24

    def test_matches_index_oracle(self):
        rng = random.Random(8)
        n = 168 * 5 + 37  # not a whole number of weeks
        values = [rng.uniform(0, 20) for _ in range(n)]
        forecast = seasonal_ma_forecast(series_from(values), horizon=200)
        for i in range(200):
            phase = (n + i) % 168
            at_phase = [values[j] for j in range(phase, n, 168)]
            expected = sum(at_phase[-4:]) / 4
            assert forecast.values[i] == pytest.approx(expected, rel=1e-12)

    def test_small_period_config(self):
        values = [1.0, 2.0] * 6
        forecast = seasonal_ma_forecast(
            series_from(values), SeasonalMaConfig(period=2, window=3), horizon=4
        )
        assert forecast.values == (1.0, 2.0, 1.0, 2.0)

    def test_insufficient_history(self):
        with pytest.raises(ValueError, match="window\\*period"):
            seasonal_ma_forecast(series_from([1.0] * 600))

    def test_bad_config(self):
        with pytest.raises(ValueError):
            SeasonalMaConfig(window=0)
        with pytest.raises(ValueError):
            SeasonalMaConfig(period=0)


class TestEnsemble:
    def test_pointwise_mean(self):
        f1 = series_from([10.0, 0.0, 7.0])
        f2 = series_from([14.0, 2.0, 7.0])
        assert ensemble(f1, f2).values == (12.0, 1.0, 7.0)

    def test_idempotent_on_equal_inputs(self):
        f = series_from([3.0, 1.0, 4.0, 1.0, 5.0])
        assert ensemble(f, f).values == f.values

    def test_misaligned_rejected(self):
        f1 = series_from([1.0, 2.0])
        f2 = HourlySeries(ORIGIN + HOUR, (1.0, 2.0))
        with pytest.raises(ValueError, match="not aligned"):
            ensemble(f1, f2)
        with pytest.raises(ValueError, match="not aligned"):
            ensemble(f1, series_from([1.0, 2.0, 3.0]))

    @given(
        st.lists(st.floats(min_value=0, max_value=1e6), min_size=1, max_size=48),
        st.integers(min_value=0, max_value=10_000),
    )
    def test_commutative_and_bounded(self, values, seed):
        rng = random.Random(seed)
        other = [rng.uniform(0, 1e6) for _ in values]
        f1, f2 = series_from(values), series_from(other)
        e12, e21 = ensemble(f1, f2), ensemble(f2, f1)
        assert e12.values == e21.values
        for a, b, e in zip(f1.values, f2.values, e12.values):
            assert min(a, b) <= e <= max(a, b)

    def test_random_pair_matches_mean_oracle(self):
        rng = random.Random(2)
        a = [rng.uniform(0, 50) for _ in range(100)]
        b = [rng.uniform(0, 50) for _ in range(100)]
        e = ensemble(series_from(a), series_from(b))
        for x, y, z in zip(a, b, e.values):
            assert z == pytest.approx((x + y) / 2, rel=1e-12)
