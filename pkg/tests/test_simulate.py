from datetime import datetime, timedelta

import pytest

from fleetplan.demand import BookingType, JobCategory, PlanningClock, hour_index
from fleetplan.events import EventStatus, apply_adjustments
from fleetplan.simulate import (
    EventInjection,
    ScenarioSpec,
    generate_scenario,
    injected_adjustments,
    scenario_without_events,
)

START = datetime(2023, 5, 1, 5)


class TestSpecValidation:
    def test_rejects_bad_uplift_length(self):
        with pytest.raises(ValueError, match="weekly_uplift"):
            ScenarioSpec(days=3, weekly_uplift=(1.0,) * 6)

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError, match="noise_std"):
            ScenarioSpec(days=3, noise_std=-1)

    def test_rejects_injection_outside_scenario(self):
        with pytest.raises(ValueError, match="outside scenario"):
            ScenarioSpec(
                days=3, events=(EventInjection(day=3, start_hour=18, hours=2, extra_jobs=5),)
            )

    def test_rejects_bad_injection_fields(self):
        with pytest.raises(ValueError, match="start_hour"):
            EventInjection(day=0, start_hour=24, hours=2, extra_jobs=5)
        with pytest.raises(ValueError, match="hours"):
            EventInjection(day=0, start_hour=18, hours=0, extra_jobs=5)

    def test_rejects_misaligned_start(self):
        spec = ScenarioSpec(days=2, start=datetime(2023, 5, 1, 9))
        with pytest.raises(ValueError, match="planning day start"):
            generate_scenario(spec)


def flat_spec(**kwargs):
    defaults = dict(
        days=4,
        base_level=6.0,
        daily_amplitude=0.0,
        weekly_uplift=(1.0,) * 7,
        noise_std=0.0,
        seed=3,
    )
    defaults.update(kwargs)
    return ScenarioSpec(**defaults)


class TestDeterministicMode:
    def test_flat_spec_gives_constant_series(self):
        _, _, actual = generate_scenario(flat_spec())
        assert len(actual) == 4 * 24
        assert len(set(actual.values)) == 1
        assert actual.values[0] > 0

    def test_zero_noise_is_pure_function_of_spec(self):
        spec = ScenarioSpec(days=3, seed=1)
        jobs1, events1, actual1 = generate_scenario(spec)
        jobs2, events2, actual2 = generate_scenario(ScenarioSpec(days=3, seed=99))
        # seed is irrelevant without noise
        assert jobs1 == jobs2
        assert actual1 == actual2

    def test_evening_peak_in_arrivals(self):
        jobs, _, _ = generate_scenario(ScenarioSpec(days=2))
        day = datetime(2023, 5, 2)

        def arrivals(hour):
            lo = day.replace(hour=hour)
            return sum(1 for j in jobs if lo <= j.start < lo + timedelta(hours=1))

        assert arrivals(19) > arrivals(11)
        assert arrivals(20) > arrivals(3)

    def test_weekly_uplift_scales_weekdays(self):
        uplift = (1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0)
        _, _, actual = generate_scenario(
            flat_spec(days=7, weekly_uplift=uplift, base_level=8.0)
        )
        # Saturday is scenario day 5 under a Monday start
        saturday = actual.window(START + timedelta(days=5, hours=6), 12)
        monday = actual.window(START + timedelta(hours=6), 12)
        assert min(saturday.values) > max(monday.values)

    def test_durations_are_category_means(self):
        # base rate of 8 puts every category in each hour's rotation
        jobs, _, _ = generate_scenario(flat_spec(days=1, base_level=8.0))
        transfers = [j for j in jobs if j.category == JobCategory.MALAYSIA_TRANSFER]
        assert transfers
        assert all(j.duration == timedelta(minutes=360) for j in transfers)

    def test_booking_types_mixed(self):
        jobs, _, _ = generate_scenario(flat_spec(days=1))
        kinds = {j.booking for j in jobs}
        assert kinds == {BookingType.PRE_BOOKED, BookingType.AD_HOC}


class TestNoisyMode:
    def test_same_seed_identical_output(self):
        spec = ScenarioSpec(days=3, noise_std=2.0, seed=42)
        out1 = generate_scenario(spec)
        out2 = generate_scenario(spec)
        assert out1[0] == out2[0]
        assert out1[1] == out2[1]
        assert out1[2] == out2[2]

    def test_different_seeds_differ(self):
        a = generate_scenario(ScenarioSpec(days=3, noise_std=2.0, seed=1))[2]
        b = generate_scenario(ScenarioSpec(days=3, noise_std=2.0, seed=2))[2]
        assert a != b

    def test_durations_vary(self):
        jobs, _, _ = generate_scenario(ScenarioSpec(days=2, noise_std=1.0, seed=5))
        singles = {j.duration for j in jobs if j.category == JobCategory.SINGLE_TRIP}
        assert len(singles) > 1


class TestInjections:
    def test_event_records_describe_injections(self):
        ev = EventInjection(day=2, start_hour=17, hours=3, extra_jobs=8, name="expo")
        _, events, _ = generate_scenario(flat_spec(events=(ev,)))
        assert len(events) == 1
        rec = events[0]
        assert rec.name == "expo"
        assert rec.start == datetime(2023, 5, 3, 17)
        assert rec.end == datetime(2023, 5, 3, 20)
        assert rec.status is EventStatus.DEFINITE
        assert rec.attendance == 25 * 8 * 3

    def test_small_hours_belong_to_their_planning_day(self):
        ev = EventInjection(day=1, start_hour=2, hours=1, extra_jobs=4)
        spec = flat_spec(events=(ev,))
        _, events, _ = generate_scenario(spec)
        # 02:00 of planning day 1 is the next calendar morning
        assert events[0].start == datetime(2023, 5, 3, 2)
        day, _ = hour_index(events[0].start, PlanningClock())
        assert day == datetime(2023, 5, 2).date()

    def test_injection_raises_series_by_at_least_extra_jobs(self):
        ev = EventInjection(day=1, start_hour=18, hours=2, extra_jobs=9)
        spec = flat_spec(events=(ev,))
        _, _, with_ev = generate_scenario(spec)
        _, _, base = generate_scenario(scenario_without_events(spec))
        for hour in (datetime(2023, 5, 2, 18), datetime(2023, 5, 2, 19)):
            assert with_ev.at(hour) - base.at(hour) >= 9

    def test_base_traffic_unchanged_by_injections(self):
        ev = EventInjection(day=0, start_hour=12, hours=2, extra_jobs=5)
        spec = ScenarioSpec(days=3, noise_std=1.5, seed=11, events=(ev,))
        with_jobs = generate_scenario(spec)[0]
        base_jobs = generate_scenario(scenario_without_events(spec))[0]
        assert [j for j in with_jobs if not j.id.startswith("sim-event")] == base_jobs

    def test_oracle_adjustments_reconstruct_event_series_exactly(self):
        events = (
            EventInjection(day=1, start_hour=17, hours=3, extra_jobs=7, name="gala"),
            EventInjection(day=2, start_hour=9, hours=2, extra_jobs=4),
        )
        for noise, seed in ((0.0, 0), (2.0, 17)):
            spec = ScenarioSpec(days=4, noise_std=noise, seed=seed, events=events)
            _, _, with_ev = generate_scenario(spec)
            _, _, base = generate_scenario(scenario_without_events(spec))
            adjusted = apply_adjustments(base, injected_adjustments(spec))
            assert adjusted.rejections == ()
            assert adjusted.final.values == with_ev.values

    def test_adjustments_link_events(self):
        ev = EventInjection(day=1, start_hour=17, hours=2, extra_jobs=3, name="fair")
        adjs = injected_adjustments(flat_spec(events=(ev,)))
        assert len(adjs) == 1
        assert adjs[0].linked_event == "fair"
        assert adjs[0].start == datetime(2023, 5, 2, 17)
        assert all(d >= 0 for d in adjs[0].delta)

    def test_zero_extra_jobs_injection_is_noop(self):
        ev = EventInjection(day=0, start_hour=10, hours=2, extra_jobs=0)
        spec = flat_spec(events=(ev,))
        assert injected_adjustments(spec) == []
        _, _, with_ev = generate_scenario(spec)
        _, _, base = generate_scenario(scenario_without_events(spec))
        assert with_ev == base
