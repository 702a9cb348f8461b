"""Hourly operations bot: live status reports and stand-down advice.

Every hour the controller wants the same three answers: how demand for the
next half day compares with what history says is normal, whether the fleet
on the road can absorb it, and whether any of the activated disposal
vehicles can be released early. This module computes all three from a
snapshot of live state plus the sliced demand history.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Mapping, Sequence

from .demand import HOUR, PlanningClock, floor_hour, hour_index
from .scheduler import ScheduleSolution, ShiftPattern, generate_patterns
from .smoothing import SlicedHistory, nearest_rank, slice_key

logger = logging.getLogger(__name__)

# the bot looks half a day ahead; releasing a vehicle is only safe when the
# whole remaining horizon keeps a cushion
WINDOW_HOURS = 12

# reports older than this are stale: the hourly cadence missed a beat
DEFAULT_STALE_AFTER = timedelta(hours=2)


@dataclass(frozen=True)
class LiveState:
    """Snapshot of the fleet at one instant: confirmed jobs and vehicles on
    the road for each of the next 12 hours, plus how many of those vehicles
    are activated disposal shifts (the only ones that can be stood down)."""

    as_of: datetime
    pre_booked: tuple[float, ...]
    active_supply: tuple[float, ...]
    active_disposal_count: int

    def __post_init__(self) -> None:
        for name, values in (
            ("pre_booked", self.pre_booked),
            ("active_supply", self.active_supply),
        ):
            if len(values) != WINDOW_HOURS:
                raise ValueError(
                    f"{name} needs {WINDOW_HOURS} hourly entries, got {len(values)}"
                )
            if any(v < 0 for v in values):
                raise ValueError(f"{name} counts must be non-negative")
        if self.active_disposal_count < 0:
            raise ValueError("active_disposal_count must be non-negative")


@dataclass(frozen=True)
class PercentilePolicy:
    """Which percentile of the historical distribution counts as "normal
    volume", tunable per (hour-of-day, weekday) so controllers can be more
    conservative at known-volatile hours."""

    default: float = 0.9
    overrides: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for p in (self.default, *self.overrides.values()):
            if not 0.0 < p < 1.0:
                raise ValueError(f"percentile {p} outside (0, 1)")

    def get(self, hour_of_day: int, weekday: int) -> float:
        return self.overrides.get((hour_of_day, weekday), self.default)

    def with_percentile(
        self, hour_of_day: int, weekday: int, percentile: float
    ) -> "PercentilePolicy":
        merged = dict(self.overrides)
        merged[(hour_of_day, weekday)] = percentile
        return PercentilePolicy(self.default, merged)


@dataclass(frozen=True)
class StandDownRecommendation:
    """How many disposal vehicles can be released, and the hourly balance
    trace that justifies the count."""

    count: int
    effective_from: datetime
    balances: tuple[float, ...]

    @property
    def min_balance(self) -> float:
        return min(self.balances)


def demand_at_percentile(
    slices: SlicedHistory,
    policy: PercentilePolicy,
    start: datetime,
    pre_booked: Sequence[float],
) -> list[float]:
    """Expected vehicles needed for each of the next 12 hours.

    Per hour: the nearest-rank percentile of the matching (hour, weekday)
    historical slice, but never below the jobs already confirmed for that
    hour; pre-booked demand is a hard floor, not an estimate. An hour with
    no history at all falls back to the floor, with a warning.
    """
    if len(pre_booked) != WINDOW_HOURS:
        raise ValueError(
            f"pre_booked needs {WINDOW_HOURS} hourly entries, got {len(pre_booked)}"
        )
    first = floor_hour(start)
    out = []
    for i in range(WINDOW_HOURS):
        hour, weekday = slice_key(first + i * HOUR, slices.clock)
        floor_val = float(pre_booked[i])
        values = slices.get(hour, weekday)
        if not values:
            logger.warning(
                "no history for hour %d weekday %d; using pre-booked count %g",
                hour, weekday, floor_val,
            )
            out.append(floor_val)
            continue
        estimate = nearest_rank(values, policy.get(hour, weekday))
        out.append(max(float(estimate), floor_val))
    return out


def recommend_stand_down(
    state: LiveState, demand: Sequence[float], reserve: int = 0
) -> StandDownRecommendation:
    """Release vehicles only when every hour of the window keeps a cushion.

    The binding quantity is the minimum hourly balance m = supply - demand
    over the next 12 hours: releasing floor(m) vehicles still leaves every
    hour covered. A reserve holds extra vehicles back on top of that. Below
    a one-vehicle cushion nothing is released.
    """
    if len(demand) != WINDOW_HOURS:
        raise ValueError(
            f"demand needs {WINDOW_HOURS} hourly entries, got {len(demand)}"
        )
    balances = tuple(s - d for s, d in zip(state.active_supply, demand))
    m = min(balances)
    if m < 1.0:
        count = 0
    else:
        count = max(0, min(math.floor(m) - reserve, state.active_disposal_count))
    return StandDownRecommendation(
        count=count, effective_from=state.as_of, balances=balances
    )


@dataclass(frozen=True)
class ReportRow:
    hour: datetime
    pre_booked: float
    demand: float
    supply: float

    @property
    def balance(self) -> float:
        return self.supply - self.demand


@dataclass(frozen=True)
class StatusReport:
    as_of: datetime
    stale: bool
    rows: tuple[ReportRow, ...]
    activations: tuple[tuple[ShiftPattern, int], ...]
    recommendation: StandDownRecommendation
    generation_seconds: float

    def to_dict(self) -> dict:
        return {
            "as_of": self.as_of.isoformat(),
            "stale": self.stale,
            "hours": [
                {
                    "hour": row.hour.isoformat(),
                    "pre_booked": row.pre_booked,
                    "demand": row.demand,
                    "supply": row.supply,
                    "balance": row.balance,
                }
                for row in self.rows
            ],
            "activations": [
                {"start": p.start, "length": p.length, "drivers": x}
                for p, x in self.activations
            ],
            "recommendation": {
                "count": self.recommendation.count,
                "effective_from": self.recommendation.effective_from.isoformat(),
                "min_balance": self.recommendation.min_balance,
            },
            "generation_seconds": self.generation_seconds,
        }

    def to_text(self) -> str:
        # timing is deliberately left out: the text form is the golden-file
        # surface and must be byte-stable for identical inputs
        lines = [f"STATUS {self.as_of:%Y-%m-%d %H:%M}"]
        if self.stale:
            lines.append("** STALE: state older than the reporting cadence **")
        lines.append(f"{'hour':>5} {'booked':>7} {'demand':>7} {'supply':>7} {'balance':>8}")
        for row in self.rows:
            flag = "  DEFICIT" if row.balance < 0 else ""
            lines.append(
                f"{row.hour:%H:%M} {row.pre_booked:7.1f} {row.demand:7.1f} "
                f"{row.supply:7.1f} {row.balance:8.1f}{flag}"
            )
        if self.activations:
            lines.append("activated shifts:")
            for p, x in self.activations:
                lines.append(
                    f"  slot {p.start:2d} len {p.length} h: {x} driver{'s' if x != 1 else ''}"
                )
        else:
            lines.append("activated shifts: none")
        r = self.recommendation
        lines.append(
            f"stand down {r.count} vehicle{'s' if r.count != 1 else ''} "
            f"(min balance {r.min_balance:.1f} over next {WINDOW_HOURS} h)"
        )
        return "\n".join(lines) + "\n"


# one report at a time per planning day; reports for different days may run
# concurrently (they share no state beyond the registry itself)
_day_locks: dict[date, threading.Lock] = {}
_registry_lock = threading.Lock()


def _day_lock(day: date) -> threading.Lock:
    with _registry_lock:
        lock = _day_locks.get(day)
        if lock is None:
            lock = _day_locks[day] = threading.Lock()
        return lock


def build_status_report(
    state: LiveState,
    demand: Sequence[float],
    schedule: ScheduleSolution,
    patterns: Sequence[ShiftPattern] | None = None,
    reserve: int = 0,
    stale_after: timedelta = DEFAULT_STALE_AFTER,
    now: datetime | None = None,
    clock: PlanningClock | None = None,
) -> StatusReport:
    """Assemble the hourly report from a state snapshot.

    Read-only over its inputs; LiveState is frozen, so the snapshot taken by
    the caller stays consistent for the whole generation.
    """
    if patterns is None:
        patterns = generate_patterns()
    started = time.perf_counter()
    day, _ = hour_index(state.as_of, clock or PlanningClock())
    with _day_lock(day):
        moment = now if now is not None else datetime.now()
        recommendation = recommend_stand_down(state, demand, reserve=reserve)
        first = floor_hour(state.as_of)
        rows = tuple(
            ReportRow(
                hour=first + i * HOUR,
                pre_booked=float(state.pre_booked[i]),
                demand=float(demand[i]),
                supply=float(state.active_supply[i]),
            )
            for i in range(WINDOW_HOURS)
        )
        return StatusReport(
            as_of=state.as_of,
            stale=moment - state.as_of > stale_after,
            rows=rows,
            activations=tuple(schedule.activations(patterns)),
            recommendation=recommendation,
            generation_seconds=time.perf_counter() - started,
        )
