"""Planning orchestration over the record store.

One service instance owns one store. All planning state (job batches,
fitted models, adjustments, percentile policy, plans, status reports) is a
fold over the store's records; nothing lives only in memory, so a restart
or a replay from the file reproduces the same answers.

Mutations are serialized through a single writer lock. What-if solving
never touches the store.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import date, datetime, timedelta

from .baselines import SeasonalMaConfig, ensemble, seasonal_ma_forecast
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
    planning_day_start,
)
from .events import (
    Adjustment,
    AdjustedForecast,
    EventRecord,
    EventStatus,
    apply_adjustments,
)
from .monitor import (
    LiveState,
    PercentilePolicy,
    StatusReport,
    build_status_report,
    demand_at_percentile,
)
from .scheduler import (
    FleetConfig,
    InfeasibleScheduleError,
    ScheduleProblem,
    ScheduleSolution,
    compute_buffer,
    compute_supply,
    generate_patterns,
    solve_schedule,
)
from .smoothing import build_slices
from .store import PlanStore, StoreRecord
from .tbats import TbatsModel, TbatsSearch, tbats_fit, tbats_forecast

DAYS_PER_WEEK = 7

# moving-average leg of the ensemble: same hour over the last three days
MA_CONFIG = SeasonalMaConfig(period=24, window=3)


class StateError(LookupError):
    """The store lacks a prerequisite (no jobs, no fitted model, ...)."""


@dataclass(frozen=True)
class OrchestrationConfig:
    refit_days: int = 30
    plan_lead_days: int = 7
    bot_minutes: int = 60

    def __post_init__(self) -> None:
        if self.refit_days < 1 or self.plan_lead_days < 0 or self.bot_minutes < 1:
            raise ValueError("cadences must be positive (lead may be zero)")


def job_to_dict(job: Job) -> dict:
    return {
        "id": job.id,
        "category": job.category.value,
        "start": job.start.isoformat(),
        "end": job.end.isoformat() if job.end else None,
        "booking": job.booking.value,
    }


def job_from_dict(raw: dict) -> Job:
    return Job(
        id=str(raw["id"]),
        category=JobCategory(raw["category"]),
        start=datetime.fromisoformat(raw["start"]),
        end=datetime.fromisoformat(raw["end"]) if raw.get("end") else None,
        booking=BookingType(raw.get("booking", "PreBooked")),
    )


def event_to_dict(event: EventRecord) -> dict:
    return {
        "name": event.name,
        "start": event.start.isoformat(),
        "end": event.end.isoformat(),
        "status": event.status.value,
        "category": event.category,
        "attendance": event.attendance,
    }


def event_from_dict(raw: dict) -> EventRecord:
    return EventRecord(
        name=str(raw["name"]),
        start=datetime.fromisoformat(raw["start"]),
        end=datetime.fromisoformat(raw["end"]),
        status=EventStatus(raw["status"]),
        category=str(raw["category"]),
        attendance=int(raw["attendance"]),
    )


def adjustment_to_dict(adj: Adjustment) -> dict:
    return {
        "id": adj.id,
        "start": adj.start.isoformat(),
        "hours": adj.hours,
        "delta": list(adj.delta) if isinstance(adj.delta, tuple) else adj.delta,
        "author": adj.author,
        "linked_event": adj.linked_event,
        "note": adj.note,
    }


def adjustment_from_dict(raw: dict) -> Adjustment:
    delta = raw["delta"]
    return Adjustment(
        id=str(raw["id"]),
        start=datetime.fromisoformat(raw["start"]),
        hours=int(raw["hours"]),
        delta=tuple(delta) if isinstance(delta, list) else float(delta),
        author=str(raw.get("author", "")),
        linked_event=raw.get("linked_event"),
        note=str(raw.get("note", "")),
    )


def _forecast_to_dict(adjusted: AdjustedForecast) -> dict:
    return {
        "origin": adjusted.base.origin.isoformat(),
        "base": list(adjusted.base.values),
        "final": list(adjusted.final.values),
        "applied": [adjustment_to_dict(a) for a in adjusted.adjustments],
        "rejections": [list(r) for r in adjusted.rejections],
        "clipped_hours": [h.isoformat() for h in adjusted.clipped_hours],
    }


def _solution_to_dict(solution: ScheduleSolution, problem: ScheduleProblem) -> dict:
    return {
        "activations": [
            {"start_slot": p.start, "length": p.length, "drivers": x}
            for p, x in solution.activations(problem.patterns)
        ],
        "objective": solution.objective,
        "coverage": list(solution.coverage),
        "optimal": solution.optimal,
    }


class PlannerService:
    def __init__(
        self,
        store: PlanStore | None = None,
        fleet: FleetConfig | None = None,
        clock: PlanningClock | None = None,
        durations: DurationModel | None = None,
        search: TbatsSearch | None = None,
        orchestration: OrchestrationConfig | None = None,
    ) -> None:
        self.store = store if store is not None else PlanStore()
        self.fleet = fleet or FleetConfig()
        self.clock = clock or PlanningClock()
        self.durations = durations or DurationModel()
        self.search = search or TbatsSearch()
        self.orchestration = orchestration or OrchestrationConfig()
        self.patterns = generate_patterns()
        self._write_lock = threading.Lock()
        self._model_cache: tuple[int, TbatsModel] | None = None

    # ------------------------------------------------------------- reads

    def jobs(self) -> list[Job]:
        """All ingested jobs; a re-ingested id keeps only the newest record."""
        by_id: dict[str, Job] = {}
        for record in self.store.records("jobs"):
            for raw in record.payload["jobs"]:
                job = job_from_dict(raw)
                by_id[job.id] = job
        return sorted(by_id.values(), key=lambda j: (j.start, j.id))

    def events(self) -> list[EventRecord]:
        by_name: dict[str, EventRecord] = {}
        for record in self.store.records("events"):
            for raw in record.payload["events"]:
                event = event_from_dict(raw)
                by_name[event.name] = event
        return sorted(by_name.values(), key=lambda e: (e.start, e.name))

    def history(self) -> HourlySeries:
        jobs = self.jobs()
        if not jobs:
            raise StateError("no jobs ingested yet")
        return inflate(jobs, self.durations)

    def model(self) -> TbatsModel:
        record = self.store.latest("model")
        if record is None:
            raise StateError("no model fitted yet")
        if self._model_cache is None or self._model_cache[0] != record.version:
            self._model_cache = (record.version, TbatsModel.from_dict(record.payload))
        return self._model_cache[1]

    def adjustments(self) -> list[Adjustment]:
        """Live adjustments in insertion order (deletions folded in)."""
        entries: dict[str, tuple[int, Adjustment]] = {}
        for record in self.store.snapshot():
            if record.kind == "adjustment":
                adj = adjustment_from_dict(record.payload)
                entries[adj.id] = (record.version, adj)
            elif record.kind == "adjustment_removed":
                entries.pop(record.payload["id"], None)
        return [adj for _, adj in sorted(entries.values(), key=lambda e: e[0])]

    def adjustment_revision(self, adjustment_id: str) -> int | None:
        """Store version of the record that last wrote this adjustment."""
        version = None
        for record in self.store.snapshot():
            if record.kind == "adjustment" and record.payload["id"] == adjustment_id:
                version = record.version
            elif (
                record.kind == "adjustment_removed"
                and record.payload["id"] == adjustment_id
            ):
                version = None
        return version

    def policy(self) -> PercentilePolicy:
        record = self.store.latest("percentile")
        if record is None:
            return PercentilePolicy()
        overrides = {
            (int(h), int(w)): float(p) for h, w, p in record.payload["overrides"]
        }
        return PercentilePolicy(
            default=float(record.payload["default"]), overrides=overrides
        )

    # --------------------------------------------------------- mutations

    def ingest_jobs(self, jobs: list[Job]) -> StoreRecord:
        if not jobs:
            raise ValueError("empty job batch")
        payload = {"jobs": [job_to_dict(j) for j in jobs], "count": len(jobs)}
        with self._write_lock:
            return self.store.append("jobs", payload)

    def ingest_events(self, events: list[EventRecord]) -> StoreRecord:
        if not events:
            raise ValueError("empty event batch")
        payload = {"events": [event_to_dict(e) for e in events], "count": len(events)}
        with self._write_lock:
            return self.store.append("events", payload)

    def fit(self, periods: tuple[float, ...] = (24.0, 168.0)) -> TbatsModel:
        model = tbats_fit(self.history(), periods, self.search)
        with self._write_lock:
            record = self.store.append("model", model.to_dict())
        self._model_cache = (record.version, model)
        return model

    def upsert_adjustment(self, adjustment: Adjustment) -> StoreRecord:
        with self._write_lock:
            return self.store.append("adjustment", adjustment_to_dict(adjustment))

    def remove_adjustment(self, adjustment_id: str) -> bool:
        with self._write_lock:
            if self.adjustment_revision(adjustment_id) is None:
                return False
            self.store.append("adjustment_removed", {"id": adjustment_id})
            return True

    def set_percentile(
        self,
        default: float | None = None,
        overrides: dict[tuple[int, int], float] | None = None,
    ) -> PercentilePolicy:
        """Merge changes onto the current policy and persist the result."""
        current = self.policy()
        merged_default = current.default if default is None else default
        merged_overrides = dict(current.overrides)
        if overrides:
            merged_overrides.update(overrides)
        policy = PercentilePolicy(default=merged_default, overrides=merged_overrides)
        payload = {
            "default": policy.default,
            "overrides": sorted([h, w, p] for (h, w), p in policy.overrides.items()),
        }
        with self._write_lock:
            self.store.append("percentile", payload)
        return policy

    # ------------------------------------------------------- forecasting

    def base_forecast(self, start: datetime, hours: int) -> HourlySeries:
        """Ensemble forecast (TBATS averaged with the 3-day moving average).

        Only the future of the ingested data can be forecast: ``start`` must
        be at or after both the history end and the model's training end.
        """
        if hours < 1:
            raise ValueError(f"hours must be >= 1, got {hours}")
        model = self.model()
        history = self.history()
        origin = max(history.end, model.train_end)
        if start < origin:
            raise ValueError(
                f"forecast start {start} precedes available data end {origin}"
            )
        end = start + hours * HOUR
        tbats_h = int((end - model.train_end) / HOUR)
        tbats_part = tbats_forecast(model, tbats_h).window(start, hours)
        ma_h = int((end - history.end) / HOUR)
        ma_part = seasonal_ma_forecast(history, MA_CONFIG, ma_h).window(start, hours)
        return ensemble(tbats_part, ma_part)

    def final_forecast(self, start: datetime, hours: int) -> AdjustedForecast:
        return apply_adjustments(self.base_forecast(start, hours), self.adjustments())

    # ---------------------------------------------------------- planning

    def run_weekly_plan(self, as_of: date | None = None) -> dict:
        """Forecast a week, apply adjustments, solve the 7 daily schedules.

        The planned week starts ``plan_lead_days`` after ``as_of`` (default:
        the first planning day not covered by history). Any infeasible day
        leaves the plan in DRAFT status with that day flagged; the rest of
        the week still solves.
        """
        clock = self.clock
        if as_of is None:
            day, slot = hour_index(self.history().end, clock)
            as_of = day if slot == 0 else day + timedelta(days=1)
            week_start = planning_day_start(as_of, clock)
        else:
            week_start = planning_day_start(
                as_of + timedelta(days=self.orchestration.plan_lead_days), clock
            )
        adjusted = self.final_forecast(week_start, DAYS_PER_WEEK * 24)
        supply = compute_supply(self.fleet)

        days = []
        total = 0
        infeasible_days = []
        for d in range(DAYS_PER_WEEK):
            day_date, _ = hour_index(week_start + timedelta(days=d), clock)
            day_values = adjusted.final.window(
                week_start + timedelta(days=d), 24
            ).values
            buffer = compute_buffer(day_values, supply)
            problem = ScheduleProblem(buffer=buffer, patterns=self.patterns)
            entry: dict = {
                "day": day_date.isoformat(),
                "buffer": list(buffer.values),
            }
            try:
                solution = solve_schedule(problem)
                entry["solution"] = _solution_to_dict(solution, problem)
                total += solution.objective
            except InfeasibleScheduleError as exc:
                entry["solution"] = None
                entry["infeasible_reason"] = str(exc)
                infeasible_days.append(day_date.isoformat())
            days.append(entry)

        with self._write_lock:
            plan_id = f"plan-{self.store.version + 1:06d}"
            payload = {
                "id": plan_id,
                "status": "DRAFT" if infeasible_days else "FINAL",
                "as_of": as_of.isoformat(),
                "week_start": week_start.isoformat(),
                "infeasible_days": infeasible_days,
                "forecast": _forecast_to_dict(adjusted),
                "supply": list(supply),
                "days": days,
                "objective_total": total,
            }
            self.store.append("plan", payload)
        return payload

    def get_plan(self, plan_id: str) -> dict:
        for record in reversed(self.store.records("plan")):
            if record.payload["id"] == plan_id:
                return record.payload
        raise StateError(f"no plan {plan_id!r}")

    def latest_plan(self) -> dict | None:
        record = self.store.latest("plan")
        return record.payload if record else None

    # ----------------------------------------------------- ad-hoc solves

    def solve_buffer(self, buffer_values: list[float]) -> dict:
        """One-off schedule for an explicit buffer; not persisted."""
        problem = ScheduleProblem(
            buffer=compute_buffer(buffer_values, (0,) * len(buffer_values)),
            patterns=self.patterns,
        )
        solution = solve_schedule(problem)
        return _solution_to_dict(solution, problem)

    def whatif(
        self,
        day: date,
        forecast_override: list[float] | None = None,
        fleet: FleetConfig | None = None,
    ) -> dict:
        """Transient schedule under tweaked demand or fleet; never persisted."""
        fleet = fleet or self.fleet
        if forecast_override is not None:
            if len(forecast_override) != 24:
                raise ValueError("forecast override needs 24 hourly values")
            day_values: tuple[float, ...] = tuple(forecast_override)
        else:
            start = planning_day_start(day, self.clock)
            day_values = self.final_forecast(start, 24).final.values
        buffer = compute_buffer(day_values, compute_supply(fleet))
        problem = ScheduleProblem(buffer=buffer, patterns=self.patterns)
        solution = solve_schedule(problem)
        result = _solution_to_dict(solution, problem)
        result["buffer"] = list(buffer.values)
        result["day"] = day.isoformat()
        return result

    # ------------------------------------------------------- monitoring

    def run_status(
        self,
        state: LiveState,
        reserve: int = 0,
        now: datetime | None = None,
    ) -> StatusReport:
        """Hourly bot pass: percentile demand, stand-down check, report."""
        slices = build_slices(self.history(), self.clock)
        demand = demand_at_percentile(slices, self.policy(), state.as_of, state.pre_booked)
        schedule = self._todays_schedule(state.as_of)
        report = build_status_report(
            state,
            demand,
            schedule,
            patterns=self.patterns,
            reserve=reserve,
            now=now,
            clock=self.clock,
        )
        with self._write_lock:
            self.store.append("status", report.to_dict())
        return report

    def latest_status(self) -> dict | None:
        record = self.store.latest("status")
        return record.payload if record else None

    def _todays_schedule(self, as_of: datetime) -> ScheduleSolution:
        """The committed solution for as_of's planning day; empty if none."""
        day, _ = hour_index(as_of, self.clock)
        key = day.isoformat()
        empty = ScheduleSolution(
            drivers=(0,) * len(self.patterns),
            active=(False,) * len(self.patterns),
            objective=0,
            coverage=(0,) * 24,
            optimal=True,
        )
        for record in reversed(self.store.records("plan")):
            for entry in record.payload["days"]:
                if entry["day"] == key and entry.get("solution"):
                    drivers = [0] * len(self.patterns)
                    by_key = {(p.start, p.length): p.index for p in self.patterns}
                    for act in entry["solution"]["activations"]:
                        drivers[by_key[(act["start_slot"], act["length"])]] = act[
                            "drivers"
                        ]
                    return ScheduleSolution(
                        drivers=tuple(drivers),
                        active=tuple(x > 0 for x in drivers),
                        objective=int(entry["solution"]["objective"]),
                        coverage=tuple(int(c) for c in entry["solution"]["coverage"]),
                        optimal=bool(entry["solution"]["optimal"]),
                    )
        return empty
