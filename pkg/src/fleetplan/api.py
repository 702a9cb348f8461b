"""HTTP surface over the planning service.

JSON in, JSON out; datetimes are ISO 8601 strings. Error shape:

* 422 for anything malformed or violating a precondition of the request
  itself, with ``detail`` entries carrying field paths (pydantic style);
* 409 when the store lacks a prerequisite (no jobs ingested, no model
  fitted) or a schedule is infeasible;
* 404 for unknown plan or adjustment ids.

Every endpoint is idempotent except POST /plan/run, which mints a new plan
id per call. POST /whatif never writes to the store.
"""

from __future__ import annotations

from datetime import date, datetime

from fastapi import Body, FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .demand import HOUR, BookingType, floor_hour, inflate
from .events import Adjustment, suggest_reference
from .scheduler import FleetConfig, InfeasibleScheduleError, InHouseShift
from .service import (
    PlannerService,
    StateError,
    _forecast_to_dict,
    adjustment_to_dict,
    event_to_dict,
)
from .smoothing import build_slices


class AdjustmentBody(BaseModel):
    id: str = Field(min_length=1)
    start: datetime
    hours: int = Field(ge=1)
    delta: float | list[float]
    author: str = Field(min_length=1)
    linked_event: str | None = None
    note: str = ""


class PlanRunBody(BaseModel):
    as_of: date | None = None


class SolveBody(BaseModel):
    buffer: list[float] = Field(min_length=1, max_length=24)


class FleetBody(BaseModel):
    base_fleet: int = Field(ge=0)
    in_house_shifts: list[dict] | None = None


class WhatIfBody(BaseModel):
    day: date
    forecast: list[float] | None = None
    fleet: FleetBody | None = None


class PercentileOverride(BaseModel):
    hour: int = Field(ge=0, le=23)
    weekday: int = Field(ge=0, le=6)
    percentile: float = Field(gt=0, lt=1)


class PercentileBody(BaseModel):
    default: float | None = Field(default=None, gt=0, lt=1)
    overrides: list[PercentileOverride] = []


def _validation_error(message: str, loc: tuple[str, ...] = ("body",)) -> HTTPException:
    return HTTPException(
        status_code=422, detail=[{"loc": list(loc), "msg": message, "type": "value_error"}]
    )


def _fleet_from_body(body: FleetBody) -> FleetConfig:
    try:
        if body.in_house_shifts is None:
            return FleetConfig(base_fleet=body.base_fleet)
        shifts = tuple(
            InHouseShift(
                start_slot=int(s["start_slot"]),
                headcount=int(s.get("headcount", 10)),
            )
            for s in body.in_house_shifts
        )
        return FleetConfig(in_house_shifts=shifts, base_fleet=body.base_fleet)
    except (KeyError, TypeError, ValueError) as exc:
        raise _validation_error(str(exc), ("body", "fleet")) from exc


def create_app(service: PlannerService) -> FastAPI:
    app = FastAPI(title="fleet planning service")
    app.state.service = service

    @app.exception_handler(StateError)
    async def _state_error(request, exc):  # noqa: ANN001
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"ok": True, "store_version": service.store.version}

    # ------------------------------------------------------------ forecast

    @app.get("/forecast")
    def get_forecast(
        from_: datetime = Query(alias="from"),
        to: datetime = Query(),
    ) -> dict:
        if from_ != floor_hour(from_) or to != floor_hour(to):
            raise _validation_error("from/to must be hour-aligned", ("query",))
        hours = int((to - from_) / HOUR)
        if hours < 1:
            raise _validation_error("'to' must be after 'from'", ("query", "to"))
        try:
            adjusted = service.final_forecast(from_, hours)
        except ValueError as exc:
            raise _validation_error(str(exc), ("query", "from")) from None
        body = _forecast_to_dict(adjusted)
        body.update(_booking_decomposition(service, from_, hours, adjusted))
        return body

    def _booking_decomposition(service, start, hours, adjusted) -> dict:
        """Demand lines for the dashboard: pre-booked floor plus the ad-hoc
        remainder of the final forecast; the two sum to the total by
        construction."""
        jobs = [j for j in service.jobs() if j.booking is BookingType.PRE_BOOKED]
        pre = [0.0] * hours
        if jobs:
            occupancy = inflate(jobs, service.durations)
            for i in range(hours):
                ts = start + i * HOUR
                if occupancy.origin <= ts < occupancy.end:
                    pre[i] = occupancy.values[occupancy.index_of(ts)]
        ad_hoc = [max(0.0, f - p) for f, p in zip(adjusted.final.values, pre)]
        return {
            "pre_booked": pre,
            "ad_hoc": ad_hoc,
            "total": [p + a for p, a in zip(pre, ad_hoc)],
        }

    # --------------------------------------------------------- adjustments

    def _echo_forecast(adjustment: Adjustment | None) -> dict | None:
        """Recomputed final forecast over the changed planning day(s)."""
        if adjustment is None:
            return None
        start = floor_hour(adjustment.start)
        hours = adjustment.hours
        try:
            return _forecast_to_dict(service.final_forecast(start, hours))
        except (StateError, ValueError):
            return None

    @app.get("/adjustments")
    def list_adjustments() -> dict:
        return {
            "adjustments": [
                {
                    **adjustment_to_dict(a),
                    "revision": service.adjustment_revision(a.id),
                }
                for a in service.adjustments()
            ]
        }

    @app.post("/adjustments")
    def post_adjustment(body: AdjustmentBody) -> dict:
        try:
            adjustment = Adjustment(
                id=body.id,
                start=body.start,
                hours=body.hours,
                delta=tuple(body.delta) if isinstance(body.delta, list) else body.delta,
                author=body.author,
                linked_event=body.linked_event,
                note=body.note,
            )
        except ValueError as exc:
            raise _validation_error(str(exc)) from None
        record = service.upsert_adjustment(adjustment)
        return {
            "adjustment": adjustment_to_dict(adjustment),
            "revision": record.version,
            "forecast": _echo_forecast(adjustment),
        }

    @app.delete("/adjustments/{adjustment_id}")
    def delete_adjustment(adjustment_id: str) -> dict:
        existing = {a.id: a for a in service.adjustments()}.get(adjustment_id)
        if not service.remove_adjustment(adjustment_id):
            raise HTTPException(status_code=404, detail=f"no adjustment {adjustment_id!r}")
        return {"deleted": adjustment_id, "forecast": _echo_forecast(existing)}

    @app.get("/adjustments/suggest")
    def suggest(event: str = Query(min_length=1)) -> dict:
        events = {e.name: e for e in service.events()}
        if event not in events:
            raise HTTPException(status_code=404, detail=f"no event {event!r}")
        history = service.history()
        suggestion = suggest_reference(
            events[event], list(events.values()), build_slices(history, service.clock), history
        )
        return {
            "category": suggestion.category,
            "deltas": list(suggestion.deltas),
            "matched_days": suggestion.matched_days,
        }

    # -------------------------------------------------------------- plans

    @app.post("/plan/run")
    def run_plan(body: PlanRunBody = Body(default=PlanRunBody())) -> dict:
        try:
            return service.run_weekly_plan(as_of=body.as_of)
        except ValueError as exc:
            raise _validation_error(str(exc)) from None

    @app.get("/plan/{plan_id}")
    def get_plan(plan_id: str) -> dict:
        try:
            return service.get_plan(plan_id)
        except StateError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    @app.get("/plans")
    def list_plans() -> dict:
        return {
            "plans": [
                {
                    "id": r.payload["id"],
                    "status": r.payload["status"],
                    "week_start": r.payload["week_start"],
                    "objective_total": r.payload["objective_total"],
                }
                for r in service.store.records("plan")
            ]
        }

    # ----------------------------------------------------------- schedules

    @app.post("/schedule/solve")
    def solve(body: SolveBody) -> dict:
        try:
            return service.solve_buffer(body.buffer)
        except InfeasibleScheduleError as exc:
            raise HTTPException(
                status_code=409, detail={"error": "infeasible", "reason": str(exc)}
            ) from None
        except ValueError as exc:
            raise _validation_error(str(exc), ("body", "buffer")) from None

    @app.post("/whatif")
    def whatif(body: WhatIfBody) -> dict:
        fleet = _fleet_from_body(body.fleet) if body.fleet else None
        try:
            return service.whatif(
                body.day, forecast_override=body.forecast, fleet=fleet
            )
        except InfeasibleScheduleError as exc:
            raise HTTPException(
                status_code=409, detail={"error": "infeasible", "reason": str(exc)}
            ) from None
        except ValueError as exc:
            raise _validation_error(str(exc)) from None

    # -------------------------------------------------------------- status

    @app.get("/status")
    def status() -> dict:
        latest = service.latest_status()
        if latest is None:
            return {"status": "empty"}
        return {"status": "ok", "report": latest}

    @app.post("/policy/percentile")
    def set_percentile(body: PercentileBody) -> dict:
        overrides = {(o.hour, o.weekday): o.percentile for o in body.overrides}
        policy = service.set_percentile(default=body.default, overrides=overrides)
        return {
            "default": policy.default,
            "overrides": [
                {"hour": h, "weekday": w, "percentile": p}
                for (h, w), p in sorted(policy.overrides.items())
            ],
        }

    return app
