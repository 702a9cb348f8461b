"""Outlier identification and smoothing of the hourly demand series.

Two stages: cap jobs with extreme durations, then replace hourly values that
sit above their (hour-of-day, weekday) slice quantile with a typical value
from the same slice. Values are replaced, never deleted, so the seasonal
structure of the series is preserved.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from enum import Enum
from typing import Mapping, Sequence

from .demand import HourlySeries, Job, PlanningClock, hour_index

MIN_JOBS_FOR_CAP = 20
MIN_SLICE_OBSERVATIONS = 4


class ReplacementStatistic(str, Enum):
    MEDIAN = "Median"
    MEAN = "Mean"


@dataclass(frozen=True)
class SmoothingConfig:
    duration_percentile: float = 0.95
    slice_percentile: float = 0.95
    replacement_statistic: ReplacementStatistic = ReplacementStatistic.MEDIAN

    def __post_init__(self) -> None:
        for name in ("duration_percentile", "slice_percentile"):
            p = getattr(self, name)
            if not 0 < p <= 1:
                raise ValueError(f"{name} must be in (0, 1]")


def nearest_rank(values: Sequence[float], percentile: float) -> float:
    """Nearest-rank quantile on the sorted multiset: value at rank
    ceil(p * n), 1-indexed."""
    if not values:
        raise ValueError("quantile of empty multiset")
    if not 0 < percentile <= 1:
        raise ValueError("percentile must be in (0, 1]")
    ordered = sorted(values)
    rank = math.ceil(percentile * len(ordered))
    return ordered[max(rank, 1) - 1]


@dataclass(frozen=True)
class CapResult:
    jobs: tuple[Job, ...]
    threshold_minutes: float | None
    capped_ids: tuple[str, ...]
    # set when the input was too small for a reliable quantile
    warning: str | None = None


def cap_outlier_jobs(jobs: Sequence[Job], config: SmoothingConfig | None = None) -> CapResult:
    """Truncate jobs whose duration exceeds the empirical duration quantile.

    The threshold is the nearest-rank ``duration_percentile`` quantile of all
    input durations; offending jobs get ``end = start + threshold``. Fewer
    than 20 jobs make the quantile unreliable, so the input passes through
    with a warning instead.
    """
    config = config or SmoothingConfig()
    for job in jobs:
        if job.end is None:
            raise ValueError(f"job {job.id} not imputed")
    if len(jobs) < MIN_JOBS_FOR_CAP:
        return CapResult(
            jobs=tuple(jobs),
            threshold_minutes=None,
            capped_ids=(),
            warning=f"only {len(jobs)} jobs; need {MIN_JOBS_FOR_CAP} for a reliable quantile",
        )
    durations = [(job.end - job.start).total_seconds() / 60.0 for job in jobs]
    threshold = nearest_rank(durations, config.duration_percentile)
    capped = []
    capped_ids = []
    for job, minutes in zip(jobs, durations):
        if minutes > threshold:
            capped.append(replace(job, end=job.start + timedelta(minutes=threshold)))
            capped_ids.append(job.id)
        else:
            capped.append(job)
    return CapResult(tuple(capped), threshold, tuple(capped_ids))


@dataclass(frozen=True)
class SlicedHistory:
    """Historical hourly values grouped by (hour-of-day, planning-day weekday).

    The weekday is that of the planning day an hour belongs to, so the small
    hours of Saturday count toward Friday's night under the default clock.
    """

    clock: PlanningClock
    slices: Mapping[tuple[int, int], tuple[float, ...]]

    def get(self, hour_of_day: int, weekday: int) -> tuple[float, ...]:
        return self.slices.get((hour_of_day, weekday), ())

    def for_timestamp(self, ts: datetime) -> tuple[float, ...]:
        return self.get(*slice_key(ts, self.clock))

    def median(self, hour_of_day: int, weekday: int) -> float | None:
        values = self.get(hour_of_day, weekday)
        return statistics.median(values) if values else None


def slice_key(ts: datetime, clock: PlanningClock) -> tuple[int, int]:
    day, _ = hour_index(ts, clock)
    return ts.hour, day.weekday()


def build_slices(history: HourlySeries, clock: PlanningClock | None = None) -> SlicedHistory:
    """Assign every historical hourly value to its (hour, weekday) slice.

    Requires at least two weeks of history so each slice is populated.
    """
    clock = clock or PlanningClock()
    if len(history) < 14 * 24:
        raise ValueError(
            f"insufficient history: need at least 14 days, got {len(history) / 24:.1f}"
        )
    buckets: dict[tuple[int, int], list[float]] = {}
    for ts, value in zip(history.timestamps(), history.values):
        buckets.setdefault(slice_key(ts, clock), []).append(value)
    return SlicedHistory(clock, {k: tuple(v) for k, v in buckets.items()})


def _replacement(values: Sequence[float], statistic: ReplacementStatistic) -> float:
    if statistic is ReplacementStatistic.MEAN:
        return sum(values) / len(values)
    return statistics.median(values)


def smooth_series(
    series: HourlySeries,
    slices: SlicedHistory,
    config: SmoothingConfig | None = None,
    exclude_self: bool = False,
) -> HourlySeries:
    """Replace hourly values above their slice quantile with a typical value.

    Each value strictly above the ``slice_percentile`` nearest-rank quantile
    of its own (hour, weekday) slice becomes the slice's replacement
    statistic. Slices with fewer than 4 observations pass their hours through
    untouched. Set ``exclude_self`` when the slices were built from the same
    window as ``series``, to drop one occurrence of the value under test from
    its slice.
    """
    config = config or SmoothingConfig()
    out = []
    for ts, value in zip(series.timestamps(), series.values):
        bucket = list(slices.for_timestamp(ts))
        if exclude_self and value in bucket:
            bucket.remove(value)
        if len(bucket) < MIN_SLICE_OBSERVATIONS:
            out.append(value)
            continue
        if value > nearest_rank(bucket, config.slice_percentile):
            out.append(_replacement(bucket, config.replacement_statistic))
        else:
            out.append(value)
    return series.with_values(out)
