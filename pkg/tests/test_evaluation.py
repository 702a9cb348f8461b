import math
from datetime import datetime, timedelta

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fleetplan.demand import HOUR, HourlySeries
from fleetplan.evaluation import AccuracyReport, backtest, evaluate

START = datetime(2023, 5, 1, 5)


def series(values, origin=START):
    return HourlySeries(origin, tuple(values))


class TestEvaluate:
    def test_perfect_forecast_is_all_zeros(self):
        a = series([3, 7, 0, 12])
        r = evaluate(a, a)
        assert (r.rmse, r.mae, r.mape) == (0.0, 0.0, 0.0)
        assert r.n_points == 4
        # the zero-actual hour is excluded from MAPE
        assert r.mape_excluded == 1

    def test_two_point_example(self):
        r = evaluate(series([10, 10]), series([8, 12]))
        assert r.rmse == pytest.approx(2.0)
        assert r.mae == pytest.approx(2.0)
        assert r.mape == pytest.approx((0.25 + 2 / 12) / 2)

    def test_matches_loop_oracle(self):
        import random

        rng = random.Random(7)
        f = [rng.uniform(0, 50) for _ in range(200)]
        a = [rng.uniform(0, 50) for _ in range(200)]
        r = evaluate(series(f), series(a))
        sq = sum((x - y) ** 2 for x, y in zip(f, a)) / len(f)
        ab = sum(abs(x - y) for x, y in zip(f, a)) / len(f)
        pct = [abs(x - y) / y for x, y in zip(f, a) if y > 0]
        assert r.rmse == pytest.approx(math.sqrt(sq))
        assert r.mae == pytest.approx(ab)
        assert r.mape == pytest.approx(sum(pct) / len(pct))

    def test_all_zero_actuals_leave_mape_absent(self):
        r = evaluate(series([1, 2]), series([0, 0]))
        assert r.mape is None
        assert r.mape_excluded == 2
        assert r.mae == pytest.approx(1.5)

    def test_misaligned_series_rejected(self):
        with pytest.raises(ValueError, match="not aligned"):
            evaluate(series([1, 2]), series([1, 2], origin=START + HOUR))
        with pytest.raises(ValueError, match="not aligned"):
            evaluate(series([1, 2]), series([1, 2, 3]))

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            evaluate(series([]), series([]))

    def test_sign_symmetry(self):
        a = [20, 30, 25, 40]
        err = [3, -5, 2, -1]
        plus = evaluate(series([x + e for x, e in zip(a, err)]), series(a))
        minus = evaluate(series([x - e for x, e in zip(a, err)]), series(a))
        assert plus.rmse == pytest.approx(minus.rmse)
        assert plus.mae == pytest.approx(minus.mae)
        assert plus.mape == pytest.approx(minus.mape)

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=100),
                st.floats(min_value=0.1, max_value=100),
            ),
            min_size=1,
            max_size=40,
        ),
        st.floats(min_value=0.01, max_value=50),
    )
    def test_scaling_property(self, pairs, c):
        f = [p[0] for p in pairs]
        a = [p[1] for p in pairs]
        base = evaluate(series(f), series(a))
        scaled = evaluate(series([c * x for x in f]), series([c * x for x in a]))
        assert scaled.rmse == pytest.approx(c * base.rmse, rel=1e-9, abs=1e-9)
        assert scaled.mae == pytest.approx(c * base.mae, rel=1e-9, abs=1e-9)
        assert scaled.mape == pytest.approx(base.mape, rel=1e-9, abs=1e-9)

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=100),
                st.floats(min_value=0, max_value=100),
            ),
            min_size=1,
            max_size=40,
        )
    )
    def test_mae_never_exceeds_rmse(self, pairs):
        f = [p[0] for p in pairs]
        a = [p[1] for p in pairs]
        r = evaluate(series(f), series(a))
        assert r.mae <= r.rmse + 1e-9


def make_history(days=10):
    values = []
    for k in range(days * 24):
        values.append(20 + 10 * math.sin(2 * math.pi * k / 24) + (k % 7))
    return series(values)


def oracle_model(history):
    """Peeks at the future; backtest should score it perfectly."""

    def model(train, horizon):
        return history.window(train.end, horizon)

    return model


def naive_model(train, horizon):
    last_day = train.values[-24:]
    values = [last_day[i % 24] for i in range(horizon)]
    return HourlySeries(train.end, tuple(values))


class TestBacktest:
    def test_perfect_foresight_scores_zero(self):
        history = make_history()
        results = backtest(history, {"oracle": oracle_model(history)}, window_days=3)
        r = results["oracle"]
        assert r.days_evaluated == 3
        assert r.rmse == 0.0
        assert r.mae == 0.0
        assert r.failures == ()

    def test_origins_are_planning_day_starts(self):
        history = make_history()
        seen = []

        def spy(train, horizon):
            seen.append((train.origin, train.end, horizon))
            return history.window(train.end, horizon)

        backtest(history, {"spy": spy}, window_days=4)
        assert len(seen) == 4
        ends = [e for _, e, _ in seen]
        assert ends == [datetime(2023, 5, d, 5) for d in (7, 8, 9, 10)]
        assert all(o == START for o, _, _ in seen)
        assert all(h == 24 for _, _, h in seen)

    def test_day_count_is_window_minus_failures(self):
        history = make_history()

        def flaky(train, horizon):
            if train.end.day % 2 == 0:
                raise RuntimeError("bad day")
            return history.window(train.end, horizon)

        r = backtest(history, {"flaky": flaky}, window_days=4)["flaky"]
        assert r.days_evaluated + len(r.failures) == 4
        assert len(r.failures) == 2
        assert all(d.day % 2 == 0 for d in r.failures)

    def test_total_failure_gives_absent_averages(self):
        history = make_history()

        def broken(train, horizon):
            raise RuntimeError("nope")

        r = backtest(history, {"broken": broken}, window_days=3)["broken"]
        assert r.days_evaluated == 0
        assert r.rmse is None and r.mae is None and r.mape is None

    def test_models_ranked_as_expected(self):
        history = make_history()
        results = backtest(
            history,
            {"oracle": oracle_model(history), "naive": naive_model},
            window_days=5,
        )
        assert results["oracle"].rmse < results["naive"].rmse

    def test_insufficient_history_rejected(self):
        history = make_history(days=3)
        with pytest.raises(ValueError, match="not enough history"):
            backtest(history, {"naive": naive_model}, window_days=3)

    def test_daily_reports_carry_dates(self):
        history = make_history()
        r = backtest(history, {"naive": naive_model}, window_days=2)["naive"]
        days = [d for d, _ in r.daily]
        assert days == [datetime(2023, 5, 9).date(), datetime(2023, 5, 10).date()]
        assert all(isinstance(rep, AccuracyReport) for _, rep in r.daily)

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError, match="window_days"):
            backtest(make_history(), {"naive": naive_model}, window_days=0)
