"""Trip records, the per-category duration model, calendar indexing, and
inflation of raw jobs into hourly ongoing-job counts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta
from enum import Enum
from typing import IO, Iterable, Iterator, Mapping, Sequence

HOUR = timedelta(hours=1)
MAX_JOB_DURATION = timedelta(hours=24)

JOBS_HEADER = ["id", "category", "start", "end", "booking"]


class JobCategory(str, Enum):
    """The seven trip categories a job can belong to."""

    ROUND_TRIP = "RoundTrip"
    SINGLE_TRIP = "SingleTrip"
    AIRPORT_ARRIVAL = "AirportArrival"
    AIRPORT_DEPARTURE = "AirportDeparture"
    FERRY_ARRIVAL = "FerryArrival"
    FERRY_DEPARTURE = "FerryDeparture"
    MALAYSIA_TRANSFER = "MalaysiaTransfer"


class BookingType(str, Enum):
    PRE_BOOKED = "PreBooked"
    AD_HOC = "AdHoc"


@dataclass(frozen=True)
class Job:
    """One trip record.

    ``end`` may be absent or inconsistent on raw records; run
    :func:`impute_duration` before relying on it.
    """

    id: str
    category: JobCategory
    start: datetime
    end: datetime | None = None
    booking: BookingType = BookingType.PRE_BOOKED

    @property
    def duration(self) -> timedelta | None:
        if self.end is None:
            return None
        return self.end - self.start

    def has_valid_duration(self) -> bool:
        """True when ``end`` is present, after ``start`` and within 24 hours."""
        return (
            self.end is not None
            and self.end > self.start
            and self.end - self.start <= MAX_JOB_DURATION
        )


@dataclass(frozen=True)
class DurationStats:
    mean_minutes: float
    std_minutes: float

    def __post_init__(self) -> None:
        if self.mean_minutes <= 0 or self.std_minutes <= 0:
            raise ValueError("duration mean and std must be positive")


# Typical duration per category in minutes (mean, std), as observed by the
# operations team.
DEFAULT_DURATIONS: Mapping[JobCategory, DurationStats] = {
    JobCategory.ROUND_TRIP: DurationStats(95, 20),
    JobCategory.SINGLE_TRIP: DurationStats(70, 15),
    JobCategory.AIRPORT_ARRIVAL: DurationStats(90, 20),
    JobCategory.AIRPORT_DEPARTURE: DurationStats(50, 10),
    JobCategory.FERRY_ARRIVAL: DurationStats(90, 20),
    JobCategory.FERRY_DEPARTURE: DurationStats(40, 10),
    JobCategory.MALAYSIA_TRANSFER: DurationStats(360, 60),
}


@dataclass(frozen=True)
class DurationModel:
    """Empirical normal duration per job category, used to repair records."""

    stats: Mapping[JobCategory, DurationStats] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.stats is None:
            object.__setattr__(self, "stats", dict(DEFAULT_DURATIONS))
        missing = [c for c in JobCategory if c not in self.stats]
        if missing:
            raise ValueError(f"duration model missing categories: {missing}")

    def mean_minutes(self, category: JobCategory) -> float:
        return self.stats[category].mean_minutes

    def std_minutes(self, category: JobCategory) -> float:
        return self.stats[category].std_minutes

    def sample_minutes(self, category: JobCategory, rng) -> float:
        """Draw a duration from the category's normal; simulator use only.

        Deterministic pipelines impute with the mean instead.
        """
        s = self.stats[category]
        draw = rng.normal(s.mean_minutes, s.std_minutes)
        return max(1.0, float(draw))


@dataclass(frozen=True)
class HourlySeries:
    """Contiguous hourly values anchored at an hour-aligned origin."""

    origin: datetime
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.origin.minute or self.origin.second or self.origin.microsecond:
            raise ValueError(f"series origin not hour-aligned: {self.origin}")
        vals = tuple(float(v) for v in self.values)
        for v in vals:
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"series values must be finite and >= 0, got {v}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        """First hour after the series."""
        return self.origin + len(self.values) * HOUR

    def timestamps(self) -> Iterator[datetime]:
        for i in range(len(self.values)):
            yield self.origin + i * HOUR

    def index_of(self, ts: datetime) -> int:
        if ts.minute or ts.second or ts.microsecond:
            raise ValueError(f"timestamp not hour-aligned: {ts}")
        idx = (ts - self.origin) // HOUR
        if not 0 <= idx < len(self.values):
            raise IndexError(f"{ts} outside series [{self.origin}, {self.end})")
        return idx

    def at(self, ts: datetime) -> float:
        return self.values[self.index_of(ts)]

    def window(self, start: datetime, hours: int) -> "HourlySeries":
        i = self.index_of(start)
        if i + hours > len(self.values):
            raise IndexError("window extends past end of series")
        return HourlySeries(start, self.values[i : i + hours])

    def with_values(self, values: Iterable[float]) -> "HourlySeries":
        return HourlySeries(self.origin, tuple(values))

    def day_values(self, day: date, clock: "PlanningClock") -> tuple[float, ...]:
        """The 24 values of one planning day, indexed by slot."""
        start = planning_day_start(day, clock)
        return self.window(start, clock.horizon_length).values


@dataclass(frozen=True)
class PlanningClock:
    """Defines the 24-hour planning day; by default it begins at 5am."""

    horizon_start_hour: int = 5
    horizon_length: int = 24

    def __post_init__(self) -> None:
        if not 0 <= self.horizon_start_hour <= 23:
            raise ValueError("horizon_start_hour must be in 0..23")
        if self.horizon_length != 24:
            raise ValueError("planning horizon is fixed at 24 hours")


def hour_index(t: datetime, clock: PlanningClock) -> tuple[date, int]:
    """Map a timestamp to (planning day, slot 0..23).

    Slot 0 is the horizon start hour; hours before it belong to the previous
    calendar day's planning day (4am falls in yesterday's slot 23 under the
    default clock).
    """
    shifted = t - timedelta(hours=clock.horizon_start_hour)
    return shifted.date(), shifted.hour


def slot_start(day: date, slot: int, clock: PlanningClock) -> datetime:
    """Inverse of :func:`hour_index` for hour-aligned timestamps."""
    if not 0 <= slot < clock.horizon_length:
        raise ValueError(f"slot must be in 0..{clock.horizon_length - 1}")
    return planning_day_start(day, clock) + slot * HOUR


def planning_day_start(day: date, clock: PlanningClock) -> datetime:
    return datetime(day.year, day.month, day.day, clock.horizon_start_hour)


def impute_duration(job: Job, model: DurationModel) -> Job:
    """Fill in or repair a job's end time.

    Complete jobs pass through unchanged; jobs with a missing end, an end not
    after the start, or a duration above 24 hours get
    ``end = start + mean_minutes(category)``.
    """
    if job.has_valid_duration():
        return job
    minutes = model.mean_minutes(job.category)
    return replace(job, end=job.start + timedelta(minutes=minutes))


def floor_hour(t: datetime) -> datetime:
    return t.replace(minute=0, second=0, microsecond=0)


_EMPTY_ORIGIN = datetime(1970, 1, 1)


def inflate(jobs: Sequence[Job], model: DurationModel | None = None) -> HourlySeries:
    """Count ongoing jobs per hour.

    A job counts fully into every hour its ``[start, end)`` span overlaps by
    any positive amount. The series runs from the hour of the earliest start
    through the hour containing the latest end. Jobs missing an end are
    imputed with ``model`` when given, otherwise rejected.
    """
    prepared = []
    for job in jobs:
        if job.end is None:
            if model is None:
                raise ValueError(f"job {job.id} has no end time; impute first")
            job = impute_duration(job, model)
        prepared.append(job)
    if not prepared:
        return HourlySeries(_EMPTY_ORIGIN, ())

    first = min(floor_hour(j.start) for j in prepared)
    last = max(floor_hour(j.end) for j in prepared)
    n = (last - first) // HOUR + 1
    counts = [0.0] * n
    for job in prepared:
        lo = (floor_hour(job.start) - first) // HOUR
        # half-open span: an end exactly on the hour does not occupy that hour
        job_last = floor_hour(job.end)
        if job.end == job_last:
            job_last -= HOUR
        hi = (job_last - first) // HOUR
        for h in range(lo, hi + 1):
            counts[h] += 1.0
    return HourlySeries(first, tuple(counts))


def read_jobs(source: IO[str]) -> list[Job]:
    """Parse the delimited job format: ``id,category,start,end,booking``.

    Timestamps are ISO-8601 local time; an empty ``end`` field means missing.
    """
    reader = csv.DictReader(source)
    if reader.fieldnames is None or list(reader.fieldnames) != JOBS_HEADER:
        raise ValueError(f"expected header {','.join(JOBS_HEADER)}")
    jobs = []
    for row in reader:
        end = row["end"].strip()
        jobs.append(
            Job(
                id=row["id"],
                category=JobCategory(row["category"]),
                start=datetime.fromisoformat(row["start"]),
                end=datetime.fromisoformat(end) if end else None,
                booking=BookingType(row["booking"]),
            )
        )
    return jobs


def write_jobs(jobs: Iterable[Job], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(JOBS_HEADER)
    for job in jobs:
        writer.writerow(
            [
                job.id,
                job.category.value,
                job.start.isoformat(),
                job.end.isoformat() if job.end is not None else "",
                job.booking.value,
            ]
        )


def write_series(series: HourlySeries, sink: IO[str], value_name: str = "value") -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["timestamp", value_name])
    for ts, v in zip(series.timestamps(), series.values):
        writer.writerow([ts.isoformat(), repr(v)])


def read_series(source: IO[str]) -> HourlySeries:
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or header[0] != "timestamp" or len(header) != 2:
        raise ValueError("expected header: timestamp,<value>")
    origin = None
    values = []
    prev = None
    for row in reader:
        ts = datetime.fromisoformat(row[0])
        if origin is None:
            origin = ts
        elif ts - prev != HOUR:
            raise ValueError(f"series rows not contiguous at {ts}")
        prev = ts
        values.append(float(row[1]))
    if origin is None:
        return HourlySeries(_EMPTY_ORIGIN, ())
    return HourlySeries(origin, tuple(values))
