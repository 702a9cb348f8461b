from datetime import date, datetime, timedelta

import pytest

from fleetplan.demand import BookingType, DurationModel, inflate
from fleetplan.events import Adjustment
from fleetplan.monitor import LiveState
from fleetplan.scheduler import FleetConfig
from fleetplan.service import (
    OrchestrationConfig,
    PlannerService,
    StateError,
    adjustment_from_dict,
    adjustment_to_dict,
    job_from_dict,
    job_to_dict,
)
from fleetplan.simulate import ScenarioSpec, generate_scenario
from fleetplan.store import PlanStore
from fleetplan.tbats import TbatsSearch

SPEC = ScenarioSpec(days=21, base_level=8, daily_amplitude=10, noise_std=1.0, seed=7)
FAST_SEARCH = TbatsSearch(max_harmonics=3, max_p=1, max_q=1, consider_trend=False)


def new_service(store=None, fleet=None):
    return PlannerService(store=store, fleet=fleet, search=FAST_SEARCH)


@pytest.fixture(scope="module")
def scenario():
    return generate_scenario(SPEC)


@pytest.fixture(scope="module")
def fitted_service(scenario):
    """Ingested and fitted once; tests must not mutate it."""
    jobs, _, _ = scenario
    service = new_service()
    service.ingest_jobs(jobs)
    service.fit(periods=(24.0,))
    return service


class TestIngestion:
    def test_jobs_round_trip_and_dedupe(self, scenario):
        jobs = scenario[0][:10]
        service = new_service()
        service.ingest_jobs(jobs)
        assert service.jobs() == sorted(jobs, key=lambda j: (j.start, j.id))

        # re-ingesting an id replaces the old record
        moved = job_from_dict({**job_to_dict(jobs[0]), "booking": "AdHoc"})
        service.ingest_jobs([moved])
        stored = {j.id: j for j in service.jobs()}
        assert stored[jobs[0].id].booking is BookingType.AD_HOC
        assert len(service.jobs()) == 10

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            new_service().ingest_jobs([])

    def test_events_round_trip(self):
        from fleetplan.simulate import EventInjection

        spec = ScenarioSpec(
            days=3,
            events=(EventInjection(day=1, start_hour=18, hours=2, extra_jobs=5, name="expo"),),
        )
        _, events, _ = generate_scenario(spec)
        service = new_service()
        service.ingest_events(events)
        assert service.events() == events

    def test_history_requires_jobs(self):
        with pytest.raises(StateError, match="no jobs"):
            new_service().history()

    def test_history_matches_direct_inflation(self, scenario, fitted_service):
        jobs = scenario[0]
        assert fitted_service.history() == inflate(jobs, DurationModel())


class TestModel:
    def test_model_requires_fit(self):
        with pytest.raises(StateError, match="no model"):
            new_service().model()

    def test_fit_persists_and_reloads(self, scenario, tmp_path):
        jobs, _, _ = scenario
        path = tmp_path / "store.ndjson"
        service = new_service(store=PlanStore(path))
        service.ingest_jobs(jobs)
        fitted = service.fit(periods=(24.0,))

        reopened = new_service(store=PlanStore(path))
        assert reopened.model().to_dict() == fitted.to_dict()


class TestAdjustments:
    def adj(self, service, ident="a1", delta=5.0):
        start = service.history().end.replace(minute=0) + timedelta(hours=30)
        start = start.replace(minute=0, second=0, microsecond=0)
        return Adjustment(
            id=ident, start=start, hours=3, delta=delta, author="ops"
        )

    def test_upsert_remove_fold(self, scenario):
        service = new_service()
        service.ingest_jobs(scenario[0])
        a1 = self.adj(service, "a1")
        a2 = self.adj(service, "a2", delta=-2.0)
        service.upsert_adjustment(a1)
        service.upsert_adjustment(a2)
        assert service.adjustments() == [a1, a2]

        assert service.remove_adjustment("a1") is True
        assert service.adjustments() == [a2]
        assert service.remove_adjustment("a1") is False
        assert service.adjustment_revision("a1") is None
        assert service.adjustment_revision("a2") is not None

    def test_round_trip_dict(self):
        adj = Adjustment(
            id="x",
            start=datetime(2023, 6, 1, 17),
            hours=2,
            delta=(1.5, 2.5),
            author="ops",
            linked_event="expo",
            note="surge",
        )
        assert adjustment_from_dict(adjustment_to_dict(adj)) == adj


class TestPolicy:
    def test_default_policy(self):
        assert new_service().policy().default == pytest.approx(0.9)

    def test_set_and_merge(self):
        service = new_service()
        service.set_percentile(default=0.8)
        service.set_percentile(overrides={(17, 4): 0.95})
        policy = service.policy()
        assert policy.default == pytest.approx(0.8)
        assert policy.get(17, 4) == pytest.approx(0.95)
        assert policy.get(9, 0) == pytest.approx(0.8)


class TestForecast:
    def test_start_before_data_end_rejected(self, fitted_service):
        with pytest.raises(ValueError, match="precedes"):
            fitted_service.base_forecast(datetime(2023, 5, 2, 5), 24)

    def test_base_forecast_span(self, fitted_service):
        start = datetime(2023, 5, 23, 5)
        forecast = fitted_service.base_forecast(start, 24)
        assert forecast.origin == start
        assert len(forecast) == 24
        assert all(v >= 0 for v in forecast.values)

    def test_final_forecast_applies_stored_adjustments(self, scenario):
        jobs, _, _ = scenario
        service = new_service()
        service.ingest_jobs(jobs)
        service.fit(periods=(24.0,))
        start = datetime(2023, 5, 23, 5)
        base = service.base_forecast(start, 24)
        service.upsert_adjustment(
            Adjustment(id="up", start=start + timedelta(hours=2), hours=2, delta=10.0, author="t")
        )
        final = service.final_forecast(start, 24)
        assert final.final.values[2] == pytest.approx(base.values[2] + 10.0)
        assert final.final.values[0] == pytest.approx(base.values[0])
        assert final.rejections == ()


class TestWeeklyPlan:
    def test_oversized_fleet_gives_empty_week(self, scenario):
        jobs, _, _ = scenario
        service = new_service(fleet=FleetConfig(base_fleet=500))
        service.ingest_jobs(jobs)
        service.fit(periods=(24.0,))
        plan = service.run_weekly_plan()
        assert plan["status"] == "FINAL"
        assert len(plan["days"]) == 7
        assert plan["objective_total"] == 0
        for day in plan["days"]:
            assert day["buffer"] == [0] * 24
            assert day["solution"]["activations"] == []

    def test_identical_state_gives_identical_plan(self, scenario):
        jobs, _, _ = scenario

        def build():
            service = new_service()
            service.ingest_jobs(jobs)
            service.fit(periods=(24.0,))
            return service.run_weekly_plan(as_of=date(2023, 5, 22))

        assert build() == build()

    def test_plan_lead_time_sets_week_start(self, scenario):
        jobs, _, _ = scenario
        service = new_service()
        service.ingest_jobs(jobs)
        service.fit(periods=(24.0,))
        plan = service.run_weekly_plan(as_of=date(2023, 5, 22))
        # default lead of one week
        assert plan["week_start"] == "2023-05-29T05:00:00"
        assert plan["days"][0]["day"] == "2023-05-29"
        assert plan["days"][-1]["day"] == "2023-06-04"

    def test_infeasible_day_leaves_draft(self, scenario):
        jobs, _, _ = scenario
        service = new_service()
        service.ingest_jobs(jobs)
        service.fit(periods=(24.0,))
        week_start = datetime(2023, 5, 29, 5)
        service.upsert_adjustment(
            Adjustment(
                id="flood",
                start=week_start + timedelta(days=2, hours=6),
                hours=1,
                delta=1000.0,
                author="t",
            )
        )
        plan = service.run_weekly_plan(as_of=date(2023, 5, 22))
        assert plan["status"] == "DRAFT"
        assert plan["infeasible_days"] == ["2023-05-31"]
        flagged = [d for d in plan["days"] if d["day"] == "2023-05-31"]
        assert flagged[0]["solution"] is None
        solved = [d for d in plan["days"] if d["solution"] is not None]
        assert len(solved) == 6

    def test_plans_are_retrievable_by_id(self, scenario):
        jobs, _, _ = scenario
        service = new_service(fleet=FleetConfig(base_fleet=500))
        service.ingest_jobs(jobs)
        service.fit(periods=(24.0,))
        plan = service.run_weekly_plan()
        assert service.get_plan(plan["id"]) == plan
        assert service.latest_plan() == plan
        with pytest.raises(StateError, match="no plan"):
            service.get_plan("plan-999999")


class TestWhatIf:
    def test_whatif_never_writes(self, fitted_service):
        before = fitted_service.store.version
        fitted_service.whatif(date(2023, 5, 23), forecast_override=[30.0] * 24)
        assert fitted_service.store.version == before

    def test_doubled_forecast_costs_at_least_baseline(self, fitted_service):
        day = date(2023, 5, 23)
        values = [30.0 + 5 * (h in range(12, 18)) for h in range(24)]
        base = fitted_service.whatif(day, forecast_override=values)
        doubled = fitted_service.whatif(
            day, forecast_override=[2 * v for v in values]
        )
        assert doubled["objective"] >= base["objective"]

    def test_fleet_override_changes_buffer(self, fitted_service):
        day = date(2023, 5, 23)
        lean = fitted_service.whatif(
            day,
            forecast_override=[40.0] * 24,
            fleet=FleetConfig(base_fleet=0),
        )
        rich = fitted_service.whatif(
            day,
            forecast_override=[40.0] * 24,
            fleet=FleetConfig(base_fleet=100),
        )
        assert rich["objective"] == 0
        assert lean["objective"] > 0

    def test_solve_buffer_empty(self, fitted_service):
        out = fitted_service.solve_buffer([0] * 24)
        assert out["objective"] == 0
        assert out["activations"] == []


class TestStatus:
    def make_state(self, as_of):
        return LiveState(
            as_of=as_of,
            pre_booked=(2.0,) * 12,
            active_supply=(30.0,) * 12,
            active_disposal_count=4,
        )

    def test_status_empty_before_any_run(self):
        assert new_service().latest_status() is None

    def test_run_status_persists_report(self, scenario):
        jobs, _, _ = scenario
        service = new_service()
        service.ingest_jobs(jobs)
        as_of = datetime(2023, 5, 20, 14)
        report = service.run_status(self.make_state(as_of), now=as_of)
        assert report.as_of == as_of
        assert not report.stale
        latest = service.latest_status()
        assert latest is not None
        assert latest["as_of"] == as_of.isoformat()

    def test_status_uses_planned_day_schedule(self, scenario):
        jobs, _, _ = scenario
        service = new_service()
        service.ingest_jobs(jobs)
        service.fit(periods=(24.0,))
        plan = service.run_weekly_plan(as_of=date(2023, 5, 22))
        day = plan["days"][0]
        assert day["day"] == "2023-05-29"
        as_of = datetime(2023, 5, 29, 14)
        report = service.run_status(self.make_state(as_of), now=as_of)
        expected = {
            (a["start_slot"], a["length"], a["drivers"])
            for a in day["solution"]["activations"]
        }
        got = {(p.start, p.length, x) for p, x in report.activations}
        assert got == expected


class TestOrchestrationConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            OrchestrationConfig(refit_days=0)
        with pytest.raises(ValueError):
            OrchestrationConfig(bot_minutes=0)
        assert OrchestrationConfig(plan_lead_days=0).plan_lead_days == 0
