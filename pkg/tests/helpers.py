"""Shared glue for building models and series in tests."""

from datetime import datetime

from fleetplan.demand import HOUR, HourlySeries
from fleetplan.tbats import (
    SeasonalComponentSpec,
    TbatsModel,
    TbatsParams,
    TbatsState,
)

ORIGIN = datetime(2018, 3, 5, 5)  # a Monday, start of the planning day


def make_model(
    params: TbatsParams,
    components=(),
    state: TbatsState | None = None,
    origin: datetime = ORIGIN,
    n: int = 0,
) -> TbatsModel:
    """Handcrafted model wrapper with consistent bookkeeping fields."""
    if state is None:
        state = TbatsState(0.0, 0.0, (), (), ())
    return TbatsModel(
        params=params,
        components=tuple(components),
        initial_state=state,
        final_state=state,
        offset=0.0,
        train_origin=origin,
        train_end=origin + n * HOUR,
        n_observations=n,
        log_likelihood=0.0,
        aic=2.0,
        free_parameters=1,
        converged=True,
    )


def model_from_case(case: dict) -> tuple[TbatsModel, HourlySeries]:
    """Build a model + series from a random_parameterization() case."""
    params = TbatsParams(
        omega=case["omega"],
        alpha=case["alpha"],
        beta=case["beta"] if case["use_trend"] else None,
        phi=case["phi"],
        long_run_trend=case["long_run_trend"],
        gammas=tuple(zip(case["gamma1"], case["gamma2"])),
        ar_coeffs=tuple(case["ar"]),
        ma_coeffs=tuple(case["ma"]),
    )
    components = tuple(
        SeasonalComponentSpec(m, k) for m, k in case["components"]
    )
    harmonics = tuple(
        v for comp in case["harmonics0"] for pair in comp for v in pair
    )
    state = TbatsState(
        level=case["level0"],
        trend=case["trend0"] if case["use_trend"] else 0.0,
        harmonics=harmonics,
        d_register=tuple(case["d0"]),
        e_register=tuple(case["e0"]),
    )
    series = HourlySeries(ORIGIN, tuple(case["y"]))
    return make_model(params, components, state, n=len(case["y"])), series
