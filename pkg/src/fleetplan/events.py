"""Expert adjustments layered on top of the mathematical forecast.

Forecasters record structured deltas (optionally linked to a known event);
the module applies them order-independently by summing all deltas first and
clipping the result at zero once. Historical event impact can be quantified
as per-hour excess over slice medians to seed new adjustments.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import IO, Iterable, Sequence

from .demand import HOUR, HourlySeries, floor_hour, hour_index, slot_start
from .smoothing import SlicedHistory

EVENTS_HEADER = ["name", "start", "end", "status", "category", "attendance"]


class EventStatus(str, Enum):
    DEFINITE = "Definite"
    TENTATIVE = "Tentative"


@dataclass(frozen=True)
class EventRecord:
    name: str
    start: datetime
    end: datetime
    status: EventStatus
    category: str
    attendance: int

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise ValueError(f"event {self.name!r}: end must be after start")
        if self.attendance < 0:
            raise ValueError(f"event {self.name!r}: attendance must be >= 0")


@dataclass(frozen=True)
class Adjustment:
    """A signed per-hour change over a contiguous hour range.

    ``delta`` is either one float applied uniformly or a vector with one
    value per hour of the range.
    """

    id: str
    start: datetime
    hours: int
    delta: float | tuple[float, ...]
    author: str
    linked_event: str | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.hours < 1:
            raise ValueError(f"adjustment {self.id!r}: hours must be >= 1")
        if self.start != floor_hour(self.start):
            raise ValueError(f"adjustment {self.id!r}: start must be hour-aligned")
        if isinstance(self.delta, (int, float)):
            object.__setattr__(self, "delta", float(self.delta))
            values: Iterable[float] = (self.delta,)
        else:
            object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
            if len(self.delta) != self.hours:
                raise ValueError(
                    f"adjustment {self.id!r}: delta vector length "
                    f"{len(self.delta)} != hours {self.hours}"
                )
            values = self.delta
        for v in values:
            if not math.isfinite(v):
                raise ValueError(f"adjustment {self.id!r}: delta must be finite")

    @property
    def end(self) -> datetime:
        return self.start + self.hours * HOUR

    def delta_at(self, offset: int) -> float:
        if isinstance(self.delta, tuple):
            return self.delta[offset]
        return self.delta


@dataclass(frozen=True)
class AdjustedForecast:
    """Base forecast plus the adjustments that were actually applied.

    ``final`` is base + the sum of all applied deltas, clipped at zero in a
    single pass, so application order never matters. ``rejections`` lists
    (adjustment id, reason) for inputs that could not be applied, and
    ``clipped_hours`` the timestamps where the clip engaged.
    """

    base: HourlySeries
    adjustments: tuple[Adjustment, ...]
    final: HourlySeries
    rejections: tuple[tuple[str, str], ...] = ()
    clipped_hours: tuple[datetime, ...] = ()


def apply_adjustments(
    base: HourlySeries, adjustments: Sequence[Adjustment]
) -> AdjustedForecast:
    """Sum all in-range adjustment deltas onto the base, clip once at zero.

    Adjustments extending outside the base span are rejected individually
    (with a reason) without blocking the rest.
    """
    totals = [0.0] * len(base)
    applied: list[Adjustment] = []
    rejections: list[tuple[str, str]] = []
    for adj in adjustments:
        if adj.start < base.origin or adj.end > base.end:
            rejections.append(
                (
                    adj.id,
                    f"range [{adj.start}, {adj.end}) outside forecast span "
                    f"[{base.origin}, {base.end})",
                )
            )
            continue
        first = base.index_of(adj.start)
        for offset in range(adj.hours):
            totals[first + offset] += adj.delta_at(offset)
        applied.append(adj)
    final_values = []
    clipped: list[datetime] = []
    for i, (value, extra) in enumerate(zip(base.values, totals)):
        adjusted = value + extra
        if adjusted < 0:
            clipped.append(base.origin + i * HOUR)
            adjusted = 0.0
        final_values.append(adjusted)
    return AdjustedForecast(
        base=base,
        adjustments=tuple(applied),
        final=base.with_values(final_values),
        rejections=tuple(rejections),
        clipped_hours=tuple(clipped),
    )


@dataclass(frozen=True)
class ReferenceSuggestion:
    """Advisory per-slot deltas derived from past days with similar events."""

    category: str
    deltas: tuple[float, ...]  # one per planning-day slot; empty if no match
    matched_days: int

    @property
    def is_empty(self) -> bool:
        return self.matched_days == 0


def suggest_reference(
    event: EventRecord,
    past_events: Sequence[EventRecord],
    slices: SlicedHistory,
    history: HourlySeries,
) -> ReferenceSuggestion:
    """Mean per-slot excess of past same-category event days over their
    slice medians. Purely advisory; an empty suggestion is not an error."""
    clock = slices.clock
    matched_days = set()
    for past in past_events:
        if past.category != event.category or past.name == event.name:
            continue
        day, _ = hour_index(past.start, clock)
        last_day, _ = hour_index(past.end - timedelta(microseconds=1), clock)
        while day <= last_day:
            matched_days.add(day)
            day += timedelta(days=1)

    usable = []
    for day in sorted(matched_days):
        first = slot_start(day, 0, clock)
        if first < history.origin or slot_start(day, 23, clock) + HOUR > history.end:
            continue  # day not fully covered by history
        usable.append(day)

    if not usable:
        return ReferenceSuggestion(event.category, (), 0)

    sums = [0.0] * clock.horizon_length
    for day in usable:
        for slot in range(clock.horizon_length):
            ts = slot_start(day, slot, clock)
            median = slices.median(ts.hour, day.weekday())
            if median is None:
                median = 0.0
            sums[slot] += history.at(ts) - median
    deltas = tuple(s / len(usable) for s in sums)
    return ReferenceSuggestion(event.category, deltas, len(usable))


@dataclass(frozen=True)
class StoredAdjustment:
    adjustment: Adjustment
    revision: int


class AdjustmentStore:
    """In-memory adjustment set: last write wins per id, every write gets a
    fresh monotonically increasing revision."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: dict[str, StoredAdjustment] = {}
        self._revision = 0

    def upsert(self, adjustment: Adjustment) -> int:
        with self._lock:
            self._revision += 1
            self._entries[adjustment.id] = StoredAdjustment(adjustment, self._revision)
            return self._revision

    def delete(self, adjustment_id: str) -> bool:
        with self._lock:
            return self._entries.pop(adjustment_id, None) is not None

    def get(self, adjustment_id: str) -> StoredAdjustment | None:
        with self._lock:
            return self._entries.get(adjustment_id)

    def list(self) -> tuple[StoredAdjustment, ...]:
        """Entries in insertion-revision order (stable and deterministic)."""
        with self._lock:
            return tuple(sorted(self._entries.values(), key=lambda s: s.revision))

    def adjustments(self) -> tuple[Adjustment, ...]:
        return tuple(entry.adjustment for entry in self.list())

    @property
    def revision(self) -> int:
        with self._lock:
            return self._revision


def read_events(source: IO[str]) -> list[EventRecord]:
    reader = csv.reader(source)
    header = next(reader, None)
    if header != EVENTS_HEADER:
        raise ValueError(f"expected header {EVENTS_HEADER}, got {header}")
    events = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(EVENTS_HEADER):
            raise ValueError(f"malformed event row: {row}")
        name, start, end, status, category, attendance = row
        events.append(
            EventRecord(
                name=name,
                start=datetime.fromisoformat(start),
                end=datetime.fromisoformat(end),
                status=EventStatus(status),
                category=category,
                attendance=int(attendance),
            )
        )
    return events


def write_events(events: Iterable[EventRecord], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(EVENTS_HEADER)
    for e in events:
        writer.writerow(
            [
                e.name,
                e.start.isoformat(),
                e.end.isoformat(),
                e.status.value,
                e.category,
                str(e.attendance),
            ]
        )
