"""Command-line entry points.

Exit codes: 0 success, 2 validation or usage error, 3 infeasible schedule
(including a weekly plan left in DRAFT by an infeasible day).

The store path comes from the FLEETPLAN_STORE environment variable, a
``store`` key in the --config file, or ./fleetplan.ndjson, in that order of
preference. --format picks between human-readable text and JSON.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import date, datetime, timedelta
from pathlib import Path

from .demand import hour_index, planning_day_start, read_jobs, write_jobs, write_series
from .events import Adjustment, read_events, write_events
from .evaluation import backtest, ensemble_forecaster, ma_forecaster, tbats_forecaster
from .scheduler import FleetConfig, InfeasibleScheduleError, InHouseShift
from .service import (
    OrchestrationConfig,
    PlannerService,
    StateError,
    _forecast_to_dict,
)
from .simulate import EventInjection, ScenarioSpec, generate_scenario
from .store import PlanStore
from .tbats import TbatsSearch, tbats_fit

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

STORE_ENV = "FLEETPLAN_STORE"
DEFAULT_STORE = "fleetplan.ndjson"

HOUR_DELTA = timedelta(hours=1)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    return config


def _fleet_from_config(raw: dict) -> FleetConfig:
    shifts = raw.get("in_house_shifts")
    if shifts is None:
        return FleetConfig(base_fleet=int(raw.get("base_fleet", 10)))
    return FleetConfig(
        base_fleet=int(raw.get("base_fleet", 10)),
        in_house_shifts=tuple(
            InHouseShift(int(s["start_slot"]), headcount=int(s.get("headcount", 10)))
            for s in shifts
        ),
    )


def _build_service(args) -> PlannerService:
    config = _load_config(args.config)
    store_path = os.environ.get(STORE_ENV) or config.get("store") or DEFAULT_STORE
    return PlannerService(
        store=PlanStore(store_path),
        fleet=_fleet_from_config(config["fleet"]) if "fleet" in config else None,
        search=TbatsSearch(**config["search"]) if "search" in config else None,
        orchestration=(
            OrchestrationConfig(**config["orchestration"])
            if "orchestration" in config
            else None
        ),
    )


def _emit(args, structured: dict, text_lines: list[str]) -> None:
    if args.format == "structured":
        print(json.dumps(structured, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _parse_float_list(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",") if v.strip() != ""]


def _parse_injection(raw: str) -> EventInjection:
    """day,start_hour,hours,extra_jobs[,name]"""
    parts = raw.split(",")
    if len(parts) not in (4, 5):
        raise ValueError(f"event spec {raw!r}: want day,start,hours,extra[,name]")
    return EventInjection(
        day=int(parts[0]),
        start_hour=int(parts[1]),
        hours=int(parts[2]),
        extra_jobs=int(parts[3]),
        name=parts[4] if len(parts) == 5 else "",
    )


def _require(args, names: list[str]) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join('--' + m for m in missing)}")


# --------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    service = _build_service(args)
    counts = {}
    if args.jobs:
        with open(args.jobs, "r", encoding="utf-8", newline="") as fh:
            jobs = read_jobs(fh)
        service.ingest_jobs(jobs)
        counts["jobs"] = len(jobs)
    if args.events:
        with open(args.events, "r", encoding="utf-8", newline="") as fh:
            events = read_events(fh)
        service.ingest_events(events)
        counts["events"] = len(events)
    if not counts:
        raise ValueError("nothing to ingest: pass --jobs and/or --events")
    _emit(
        args,
        {"ingested": counts, "store_version": service.store.version},
        [f"ingested {n} {kind}" for kind, n in counts.items()],
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    service = _build_service(args)
    periods = tuple(_parse_float_list(args.periods))
    model = service.fit(periods=periods)
    _emit(
        args,
        {
            "periods": list(periods),
            "aic": model.aic,
            "log_likelihood": model.log_likelihood,
            "converged": model.converged,
        },
        [
            f"fitted periods {args.periods} aic {model.aic:.1f} "
            f"converged {model.converged}"
        ],
    )
    return EXIT_OK


def cmd_forecast(args) -> int:
    service = _build_service(args)
    start = datetime.fromisoformat(args.start)
    end = datetime.fromisoformat(args.to)
    hours = int((end - start).total_seconds() // 3600)
    if hours < 1:
        raise ValueError("--to must be after --from")
    adjusted = service.final_forecast(start, hours)
    if args.format == "structured":
        print(json.dumps(_forecast_to_dict(adjusted), sort_keys=True))
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(["hour", "base", "final"])
        for ts, b, f in zip(
            adjusted.base.timestamps(), adjusted.base.values, adjusted.final.values
        ):
            writer.writerow([ts.isoformat(), f"{b:.3f}", f"{f:.3f}"])
    return EXIT_OK


def cmd_adjust(args) -> int:
    service = _build_service(args)
    if args.action == "add":
        _require(args, ["id", "start", "hours", "delta"])
        delta_values = _parse_float_list(args.delta)
        delta: float | tuple[float, ...]
        delta = delta_values[0] if len(delta_values) == 1 else tuple(delta_values)
        adjustment = Adjustment(
            id=args.id,
            start=datetime.fromisoformat(args.start),
            hours=args.hours,
            delta=delta,
            author=args.author,
            linked_event=args.event,
            note=args.note,
        )
        record = service.upsert_adjustment(adjustment)
        _emit(
            args,
            {"id": args.id, "revision": record.version},
            [f"stored adjustment {args.id} (revision {record.version})"],
        )
    elif args.action == "remove":
        _require(args, ["id"])
        if not service.remove_adjustment(args.id):
            raise ValueError(f"no adjustment {args.id!r}")
        _emit(args, {"removed": args.id}, [f"removed adjustment {args.id}"])
    else:
        entries = service.adjustments()
        _emit(
            args,
            {"adjustments": [a.id for a in entries]},
            [
                f"{a.id}\t{a.start.isoformat()}\t{a.hours}h\t{a.delta}\t{a.author}"
                for a in entries
            ]
            or ["(none)"],
        )
    return EXIT_OK


def cmd_plan(args) -> int:
    service = _build_service(args)
    as_of = date.fromisoformat(args.as_of) if args.as_of else None
    plan = service.run_weekly_plan(as_of=as_of)
    if args.out:
        Path(args.out).write_text(
            json.dumps(plan, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    lines = [
        f"plan {plan['id']} {plan['status']} "
        f"week {plan['week_start'][:10]} objective {plan['objective_total']}"
    ]
    for day in plan["days"]:
        if day["solution"] is None:
            lines.append(f"  {day['day']}: INFEASIBLE")
        else:
            lines.append(
                f"  {day['day']}: {day['solution']['objective']} driver-hours, "
                f"{len(day['solution']['activations'])} shifts"
            )
    _emit(args, plan, lines)
    return EXIT_INFEASIBLE if plan["status"] == "DRAFT" else EXIT_OK


def cmd_solve(args) -> int:
    service = _build_service(args)
    if args.buffer_file:
        buffer = json.loads(Path(args.buffer_file).read_text(encoding="utf-8"))
        if not isinstance(buffer, list):
            raise ValueError(f"{args.buffer_file} must hold a JSON array")
    elif args.buffer is not None:
        buffer = [int(v) for v in args.buffer.split(",")]
    else:
        raise ValueError("pass --buffer or --buffer-file")
    solution = service.solve_buffer(buffer)
    if args.out:
        Path(args.out).write_text(
            json.dumps(solution, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    lines = [f"objective {solution['objective']} driver-hours"]
    for act in solution["activations"]:
        lines.append(
            f"  slot {act['start_slot']:2d} len {act['length']}h: {act['drivers']} drivers"
        )
    _emit(args, solution, lines)
    return EXIT_OK


def cmd_report(args) -> int:
    from .plots import day_schedule_figure, forecast_figure, save_figures, week_figure

    service = _build_service(args)
    plan = service.get_plan(args.plan) if args.plan else service.latest_plan()
    if plan is None:
        raise StateError("no plan to report on; run `fleetplan plan` first")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    forecast = plan["forecast"]
    origin = datetime.fromisoformat(forecast["origin"])
    with (out_dir / "forecast.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "base", "final"])
        for i, (b, f) in enumerate(zip(forecast["base"], forecast["final"])):
            writer.writerow(
                [(origin + i * HOUR_DELTA).isoformat(), f"{b:.3f}", f"{f:.3f}"]
            )

    with (out_dir / "schedule.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "slot", "buffer", "coverage"])
        for day in plan["days"]:
            coverage = day["solution"]["coverage"] if day["solution"] else [""] * 24
            for slot, b in enumerate(day["buffer"]):
                writer.writerow([day["day"], slot, b, coverage[slot]])

    figures = {
        "forecast": forecast_figure(origin, forecast["base"], forecast["final"]),
        "week": week_figure(plan),
    }
    first_solved = next((d for d in plan["days"] if d["solution"]), None)
    if first_solved:
        figures[f"day-{first_solved['day']}"] = day_schedule_figure(
            first_solved["buffer"],
            first_solved["solution"]["coverage"],
            first_solved["solution"]["activations"],
            day_label=first_solved["day"],
        )
    paths = save_figures(figures, out_dir)
    written = sorted(
        str(p) for p in [out_dir / "forecast.csv", out_dir / "schedule.csv", *paths]
    )
    _emit(args, {"plan": plan["id"], "files": written}, written)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = ScenarioSpec(
        days=args.days,
        base_level=args.base_level,
        daily_amplitude=args.amplitude,
        weekly_uplift=tuple(_parse_float_list(args.uplift)),
        events=tuple(_parse_injection(e) for e in args.event or []),
        noise_std=args.noise,
        seed=args.seed,
    )
    jobs, events, actual = generate_scenario(spec)
    with open(args.jobs_out, "w", encoding="utf-8", newline="") as fh:
        write_jobs(jobs, fh)
    if args.events_out:
        with open(args.events_out, "w", encoding="utf-8", newline="") as fh:
            write_events(events, fh)
    if args.actual_out:
        with open(args.actual_out, "w", encoding="utf-8", newline="") as fh:
            write_series(actual, fh, value_name="vehicles")
    _emit(
        args,
        {"jobs": len(jobs), "events": len(events), "hours": len(actual)},
        [f"simulated {len(jobs)} jobs, {len(events)} events, {len(actual)} hours"],
    )
    return EXIT_OK


def cmd_backtest(args) -> int:
    service = _build_service(args)
    history = service.history()

    # fit strictly before the evaluation window, on whole planning days
    day, slot = hour_index(history.end - timedelta(days=args.window), service.clock)
    cut = planning_day_start(day if slot == 0 else day + timedelta(days=1), service.clock)
    train_hours = int((cut - history.origin).total_seconds() // 3600)
    if train_hours < 1:
        raise ValueError("history too short for that window")
    train0 = history.window(history.origin, train_hours)

    wanted = [m.strip() for m in args.models.split(",") if m.strip()]
    unknown = set(wanted) - {"ma3", "tbats", "ensemble"}
    if unknown:
        raise ValueError(f"unknown model(s): {', '.join(sorted(unknown))}")
    models = {}
    if "ma3" in wanted:
        models["ma3"] = ma_forecaster(3)
    if "tbats" in wanted or "ensemble" in wanted:
        fitted = tbats_fit(train0, tuple(_parse_float_list(args.periods)), service.search)
        tb = tbats_forecaster(fitted)
        if "tbats" in wanted:
            models["tbats"] = tb
        if "ensemble" in wanted:
            models["ensemble"] = ensemble_forecaster(tb, ma_forecaster(3))

    results = backtest(history, models, window_days=args.window)
    structured = {}
    lines = ["model,rmse,mae,mape,days,failures"]
    for name, result in results.items():
        mape = f"{result.mape:.4f}" if result.mape is not None else ""
        lines.append(
            f"{name},{result.rmse:.3f},{result.mae:.3f},{mape},"
            f"{result.days_evaluated},{len(result.failures)}"
        )
        structured[name] = {
            "rmse": result.rmse,
            "mae": result.mae,
            "mape": result.mape,
            "days": result.days_evaluated,
            "failures": len(result.failures),
        }
    _emit(args, structured, lines)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    service = _build_service(args)
    uvicorn.run(create_app(service), host=args.host, port=args.port)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument(
        "--format", choices=("text", "structured"), default="text", help="output style"
    )
    common.add_argument("--seed", type=int, default=0, help="random seed")

    parser = argparse.ArgumentParser(
        prog="fleetplan", description="demand forecasting and fleet scheduling"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="load job/event files")
    p.add_argument("--jobs")
    p.add_argument("--events")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", parents=[common], help="fit the forecast model")
    p.add_argument("--periods", default="24,168")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", parents=[common], help="adjusted forecast")
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--to", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("adjust", parents=[common], help="manage adjustments")
    p.add_argument("action", choices=("add", "remove", "list"))
    p.add_argument("--id")
    p.add_argument("--start")
    p.add_argument("--hours", type=int)
    p.add_argument("--delta")
    p.add_argument("--author", default="cli")
    p.add_argument("--event")
    p.add_argument("--note", default="")
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("plan", parents=[common], help="run the weekly plan")
    p.add_argument("--as-of", dest="as_of")
    p.add_argument("--out", help="write the plan artifact (JSON)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("solve", parents=[common], help="solve one buffer")
    p.add_argument("--buffer", help="comma-separated hourly buffer")
    p.add_argument("--buffer-file", help="JSON array file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", parents=[common], help="render plan report files")
    p.add_argument("--plan", help="plan id (default: latest)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic data")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--base-level", type=float, default=10.0)
    p.add_argument("--amplitude", type=float, default=15.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--uplift", default="1,1,1,1,1.1,1.3,1.2")
    p.add_argument("--event", action="append", help="day,start,hours,extra[,name]")
    p.add_argument("--jobs-out", required=True)
    p.add_argument("--events-out")
    p.add_argument("--actual-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("backtest", parents=[common], help="rolling-origin evaluation")
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--models", default="ma3,tbats,ensemble")
    p.add_argument("--periods", default="24,168")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleScheduleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, StateError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
