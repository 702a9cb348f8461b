"""Synthetic trip-record generator for testing and demos.

Produces a job log whose hourly arrival rate follows a daily curve (evening
peak) scaled by per-weekday factors, optionally with injected event surges,
plus the matching event records and the resulting vehicles-in-use series.

Randomness rules:

* ``noise_std == 0`` uses no random numbers at all: each hour gets exactly
  ``round(rate)`` jobs, categories cycle through a fixed per-hour deck,
  start minutes are spread evenly and durations are the category means.
  The output is a pure function of the spec.
* ``noise_std > 0`` draws the hourly count, categories, start minutes and
  durations from a generator seeded with ``spec.seed``.

Event jobs come from per-injection substreams, so adding or removing an
injection never perturbs the base traffic. That makes the difference
between a scenario and its event-free twin exactly the occupancy of the
event jobs, which :func:`injected_adjustments` exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta

import numpy as np

from .demand import (
    HOUR,
    BookingType,
    DurationModel,
    HourlySeries,
    Job,
    JobCategory,
    PlanningClock,
    hour_index,
    inflate,
)
from .events import Adjustment, EventRecord, EventStatus

# Hours simulated before the requested window so occupancy at the window
# start is already in steady state (longest mean duration is 6 h).
WARMUP_HOURS = 12

_CATEGORIES = tuple(JobCategory)

# Evening peak: bell curve centred between 7 and 8 pm.
_PEAK_HOUR = 19.5
_PEAK_WIDTH = 3.0


def _daily_shape(hour: int) -> float:
    return math.exp(-0.5 * ((hour - _PEAK_HOUR) / _PEAK_WIDTH) ** 2)


@dataclass(frozen=True)
class EventInjection:
    """Extra jobs per hour over a clock-hour range on one scenario day.

    ``start_hour`` is the wall-clock hour; hours 0..4 fall on the next
    calendar morning but still belong to planning day ``day``.
    """

    day: int
    start_hour: int
    hours: int
    extra_jobs: int
    name: str = ""

    def __post_init__(self) -> None:
        if self.day < 0:
            raise ValueError("injection day must be >= 0")
        if not 0 <= self.start_hour <= 23:
            raise ValueError("injection start_hour must be in 0..23")
        if self.hours < 1:
            raise ValueError("injection hours must be >= 1")
        if self.extra_jobs < 0:
            raise ValueError("injection extra_jobs must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    days: int
    base_level: float = 10.0
    daily_amplitude: float = 15.0
    weekly_uplift: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.1, 1.3, 1.2)
    events: tuple[EventInjection, ...] = ()
    noise_std: float = 0.0
    seed: int = 0
    start: datetime = datetime(2023, 5, 1, 5)

    def __post_init__(self) -> None:
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.base_level < 0 or self.daily_amplitude < 0:
            raise ValueError("base_level and daily_amplitude must be >= 0")
        if len(self.weekly_uplift) != 7:
            raise ValueError("weekly_uplift needs one factor per weekday")
        if any(u < 0 for u in self.weekly_uplift):
            raise ValueError("weekly_uplift factors must be >= 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for ev in self.events:
            if ev.day >= self.days:
                raise ValueError(
                    f"injection on day {ev.day} outside scenario of {self.days} days"
                )

    @property
    def window_hours(self) -> int:
        return self.days * 24


def _rate(spec: ScenarioSpec, ts: datetime, clock: PlanningClock) -> float:
    day, _ = hour_index(ts, clock)
    uplift = spec.weekly_uplift[day.weekday()]
    return (spec.base_level + spec.daily_amplitude * _daily_shape(ts.hour)) * uplift


def _make_jobs(
    hour_start: datetime,
    count: int,
    prefix: str,
    counter: int,
    model: DurationModel,
    rng: np.random.Generator | None,
) -> list[Job]:
    """``count`` jobs starting within one hour; rng None = deterministic mode."""
    jobs = []
    for i in range(count):
        if rng is None:
            category = _CATEGORIES[i % len(_CATEGORIES)]
            minute = (i * 60) // count
            minutes = model.mean_minutes(category)
        else:
            category = _CATEGORIES[int(rng.integers(len(_CATEGORIES)))]
            minute = int(rng.integers(60))
            minutes = model.sample_minutes(category, rng)
        start = hour_start + timedelta(minutes=minute)
        booking = BookingType.AD_HOC if (counter + i) % 3 == 0 else BookingType.PRE_BOOKED
        jobs.append(
            Job(
                id=f"{prefix}-{counter + i:06d}",
                category=category,
                start=start,
                end=start + timedelta(minutes=minutes),
                booking=booking,
            )
        )
    return jobs


def _injection_hours(
    spec: ScenarioSpec, ev: EventInjection, clock: PlanningClock
) -> list[datetime]:
    day_start = spec.start + timedelta(days=ev.day)
    offset = (ev.start_hour - clock.horizon_start_hour) % 24
    first = day_start + offset * HOUR
    return [first + k * HOUR for k in range(ev.hours)]


def _event_jobs(
    spec: ScenarioSpec,
    index: int,
    ev: EventInjection,
    model: DurationModel,
    clock: PlanningClock,
) -> list[Job]:
    rng = np.random.default_rng([spec.seed, 1, index]) if spec.noise_std > 0 else None
    name = ev.name or f"event-{index}"
    jobs: list[Job] = []
    for hour_start in _injection_hours(spec, ev, clock):
        jobs.extend(
            _make_jobs(hour_start, ev.extra_jobs, f"sim-{name}", len(jobs), model, rng)
        )
    return jobs


def generate_scenario(
    spec: ScenarioSpec,
    model: DurationModel | None = None,
    clock: PlanningClock | None = None,
) -> tuple[list[Job], list[EventRecord], HourlySeries]:
    """Build (job log, event records, vehicles-in-use series) for a spec.

    The job log includes a warm-up period before ``spec.start``; the
    returned series covers exactly ``[spec.start, spec.start + days*24h)``.
    """
    model = model or DurationModel()
    clock = clock or PlanningClock()
    if spec.start.hour != clock.horizon_start_hour or spec.start != spec.start.replace(
        minute=0, second=0, microsecond=0
    ):
        raise ValueError(
            f"scenario start {spec.start} must be a planning day start "
            f"({clock.horizon_start_hour:02d}:00)"
        )

    rng = np.random.default_rng([spec.seed, 0]) if spec.noise_std > 0 else None
    jobs: list[Job] = []
    counter = 0
    first_hour = spec.start - WARMUP_HOURS * HOUR
    for k in range(WARMUP_HOURS + spec.window_hours):
        hour_start = first_hour + k * HOUR
        rate = _rate(spec, hour_start, clock)
        if rng is not None:
            rate += float(rng.normal(0.0, spec.noise_std))
        count = max(0, int(round(rate)))
        jobs.extend(_make_jobs(hour_start, count, "sim", counter, model, rng))
        counter += count

    events: list[EventRecord] = []
    for index, ev in enumerate(spec.events):
        jobs.extend(_event_jobs(spec, index, ev, model, clock))
        hours = _injection_hours(spec, ev, clock)
        events.append(
            EventRecord(
                name=ev.name or f"event-{index}",
                start=hours[0],
                end=hours[-1] + HOUR,
                status=EventStatus.DEFINITE,
                category="conference",
                # crude size proxy: ~25 attendees generate one extra trip
                attendance=25 * ev.extra_jobs * ev.hours,
            )
        )

    jobs.sort(key=lambda j: (j.start, j.id))
    occupancy = inflate(jobs)
    values = []
    for k in range(spec.window_hours):
        ts = spec.start + k * HOUR
        if occupancy.origin <= ts < occupancy.end:
            values.append(occupancy.values[occupancy.index_of(ts)])
        else:
            values.append(0.0)
    return jobs, events, HourlySeries(spec.start, tuple(values))


def injected_adjustments(
    spec: ScenarioSpec,
    model: DurationModel | None = None,
    clock: PlanningClock | None = None,
) -> list[Adjustment]:
    """The exact occupancy added by each injection, as forecast adjustments.

    Because event jobs use substreams independent of the base traffic, the
    occupancy of an injection's jobs alone is precisely the difference its
    presence makes to the generated series. These are the adjustments a
    perfectly informed forecaster would enter.
    """
    model = model or DurationModel()
    clock = clock or PlanningClock()
    window_end = spec.start + spec.window_hours * HOUR
    adjustments = []
    for index, ev in enumerate(spec.events):
        bump = inflate(_event_jobs(spec, index, ev, model, clock))
        start = max(bump.origin, spec.start)
        end = min(bump.end, window_end)
        hours = int((end - start) / HOUR)
        if hours < 1:
            continue
        delta = bump.window(start, hours).values
        name = ev.name or f"event-{index}"
        adjustments.append(
            Adjustment(
                id=f"adj-{name}",
                start=start,
                hours=hours,
                delta=delta,
                author="simulator",
                linked_event=name,
                note="known event uplift",
            )
        )
    return adjustments


def scenario_without_events(spec: ScenarioSpec) -> ScenarioSpec:
    return replace(spec, events=())
