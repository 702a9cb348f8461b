"""Multi-seasonal exponential smoothing state-space forecaster.

The model combines a Box-Cox transform, a damped local trend, one or more
trigonometric seasonal components, and ARMA(p, q) errors. Observations enter
in transformed space:

    z_t = l_{t-1} + phi * b_{t-1} + sum_i s^(i)_{t-1} + d_t

where each seasonal component is a sum of k_i harmonic pairs rotated by
lambda_j = 2*pi*j / m_i per step, and d_t is an ARMA process whose
innovations eps_t drive every update through d_t itself:

    l_t        = l_{t-1} + phi * b_{t-1} + alpha * d_t
    b_t        = (1 - phi) * b + phi * b_{t-1} + beta * d_t
    s_{j,t}    =  s_{j,t-1} cos(lambda_j) + s*_{j,t-1} sin(lambda_j) + gamma1 * d_t
    s*_{j,t}   = -s_{j,t-1} sin(lambda_j) + s*_{j,t-1} cos(lambda_j) + gamma2 * d_t
    d_t        = sum_i ar_i d_{t-i} + sum_j ma_j eps_{t-j} + eps_t

Fitting maximizes the concentrated Gaussian likelihood of the innovations,
adjusted by the Box-Cox Jacobian so models with different omega are
comparable, with a Nelder-Mead search over the continuous parameters and an
AIC-guided search over the discrete structure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from datetime import datetime
from typing import IO, Sequence

import numpy as np
from scipy.optimize import minimize

from .demand import HourlySeries

try:
    from numba import njit as _njit
except Exception:  # pragma: no cover - optional accelerator only
    def _njit(**_kwargs):
        def wrap(fn):
            return fn

        return wrap


MODEL_FORMAT = "fleetplan.seasonal-state-space"
MODEL_FORMAT_VERSION = 1

TWO_PI = 2.0 * math.pi


class NumericalDivergenceError(ArithmeticError):
    """The filter produced a non-finite quantity at some step."""


def box_cox(y: float, omega: float) -> float:
    """Box-Cox transform: (y**omega - 1)/omega, ln(y) at omega = 0.

    Evaluated as expm1(omega*ln y)/omega, which is the same quantity without
    the cancellation the textbook form suffers for small omega.
    """
    if y <= 0:
        raise ValueError(f"Box-Cox transform requires y > 0, got {y}")
    if omega == 0:
        return math.log(y)
    if omega == 1:
        return y - 1.0
    return math.expm1(omega * math.log(y)) / omega


def inverse_box_cox(z: float, omega: float) -> float:
    if omega == 0:
        return math.exp(z)
    if omega == 1:
        if z <= -1.0:
            raise ValueError(f"inverse Box-Cox undefined: 1 + omega*z = {1.0 + z} <= 0")
        return z + 1.0
    base = 1.0 + omega * z
    if base <= 0:
        raise ValueError(f"inverse Box-Cox undefined: 1 + omega*z = {base} <= 0")
    return math.exp(math.log1p(omega * z) / omega)


@dataclass(frozen=True)
class SeasonalComponentSpec:
    """One seasonal component: period in hours (may be non-integer) and the
    number of harmonic pairs used to represent it."""

    period: float
    harmonics: int

    def __post_init__(self) -> None:
        if self.period < 2:
            raise ValueError(f"seasonal period must be >= 2, got {self.period}")
        if not 1 <= self.harmonics <= math.floor(self.period / 2):
            raise ValueError(
                f"harmonics must satisfy 1 <= k <= floor(period/2)="
                f"{math.floor(self.period / 2)}, got {self.harmonics}"
            )

    def angular_frequencies(self) -> tuple[float, ...]:
        return tuple(TWO_PI * j / self.period for j in range(1, self.harmonics + 1))


def _poly_roots_outside_unit(coeffs: Sequence[float], sign: float) -> bool:
    """Roots of 1 + sign*c1*z + sign*c2*z^2 + ... all outside the unit circle.

    sign=-1 checks AR stationarity (1 - phi1 z - ...), sign=+1 checks MA
    invertibility. Closed forms for orders 1 and 2, numpy for the rest.
    """
    c = [sign * v for v in coeffs]
    while c and c[-1] == 0:
        c.pop()
    n = len(c)
    if n == 0:
        return True
    if n == 1:
        return abs(c[0]) < 1
    if n == 2:
        c1, c2 = c
        return abs(c2) < 1 and c2 + c1 > -1 and c2 - c1 > -1
    roots = np.roots([*reversed(c), 1.0])
    return bool(np.all(np.abs(roots) > 1.0))


@dataclass(frozen=True)
class TbatsParams:
    """Continuous model parameters. ``beta is None`` means no trend term; the
    trend state is then identically zero and phi / long_run_trend are inert."""

    omega: float
    alpha: float
    beta: float | None = None
    phi: float = 1.0
    long_run_trend: float = 0.0
    gammas: tuple[tuple[float, float], ...] = ()
    ar_coeffs: tuple[float, ...] = ()
    ma_coeffs: tuple[float, ...] = ()
    noise_variance: float | None = None

    def __post_init__(self) -> None:
        if self.beta is not None and not 0.8 <= self.phi <= 1.0:
            raise ValueError(f"damping phi must lie in [0.8, 1], got {self.phi}")
        if self.noise_variance is not None and self.noise_variance <= 0:
            raise ValueError("noise_variance must be positive")
        object.__setattr__(self, "gammas", tuple((float(a), float(b)) for a, b in self.gammas))
        object.__setattr__(self, "ar_coeffs", tuple(float(v) for v in self.ar_coeffs))
        object.__setattr__(self, "ma_coeffs", tuple(float(v) for v in self.ma_coeffs))

    @property
    def has_trend(self) -> bool:
        return self.beta is not None

    @property
    def p(self) -> int:
        return len(self.ar_coeffs)

    @property
    def q(self) -> int:
        return len(self.ma_coeffs)

    def arma_admissible(self) -> bool:
        """Stationarity of the AR part and invertibility of the MA part."""
        return _poly_roots_outside_unit(self.ar_coeffs, -1.0) and _poly_roots_outside_unit(
            self.ma_coeffs, +1.0
        )


@dataclass(frozen=True)
class TbatsState:
    """Filter state after some step: level, trend, interleaved harmonic pairs
    (s, s*) in component order, then the last p values of d and the last q
    innovations, most recent first."""

    level: float
    trend: float
    harmonics: tuple[float, ...]
    d_register: tuple[float, ...]
    e_register: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.harmonics) % 2:
            raise ValueError("harmonics must hold (s, s*) pairs, got odd length")

    @property
    def dimension(self) -> int:
        return 2 + len(self.harmonics) + len(self.d_register) + len(self.e_register)

    def as_vector(self) -> tuple[float, ...]:
        return (self.level, self.trend, *self.harmonics, *self.d_register, *self.e_register)


@dataclass(frozen=True)
class FilterResult:
    states: tuple[TbatsState, ...]
    residuals: tuple[float, ...]
    fitted: tuple[float, ...]  # one-step predictions in transformed space
    sse: float
    log_likelihood: float


@dataclass(frozen=True)
class TbatsModel:
    params: TbatsParams
    components: tuple[SeasonalComponentSpec, ...]
    initial_state: TbatsState
    final_state: TbatsState
    offset: float
    train_origin: datetime
    train_end: datetime
    n_observations: int
    log_likelihood: float  # Jacobian-adjusted, the quantity the fit maximized
    aic: float
    free_parameters: int
    converged: bool
    residuals: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        expected_dim = (
            2
            + 2 * sum(c.harmonics for c in self.components)
            + self.params.p
            + self.params.q
        )
        for name, state in (("initial", self.initial_state), ("final", self.final_state)):
            if state.dimension != expected_dim:
                raise ValueError(
                    f"{name} state dimension {state.dimension} != expected {expected_dim}"
                )
        if len(self.params.gammas) != len(self.components):
            raise ValueError("one (gamma1, gamma2) pair required per seasonal component")
        if not self.params.arma_admissible():
            raise ValueError("ARMA coefficients are not stationary/invertible")
        expected_aic = -2.0 * self.log_likelihood + 2.0 * self.free_parameters
        if not math.isclose(self.aic, expected_aic, rel_tol=1e-9, abs_tol=1e-6):
            raise ValueError(f"AIC {self.aic} inconsistent with -2ll+2k = {expected_aic}")

    @property
    def forecast_origin(self) -> datetime:
        """First hour after the training window."""
        return self.train_end

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "params": {
                "omega": self.params.omega,
                "alpha": self.params.alpha,
                "beta": self.params.beta,
                "phi": self.params.phi,
                "long_run_trend": self.params.long_run_trend,
                "gammas": [list(g) for g in self.params.gammas],
                "ar_coeffs": list(self.params.ar_coeffs),
                "ma_coeffs": list(self.params.ma_coeffs),
                "noise_variance": self.params.noise_variance,
            },
            "components": [
                {"period": c.period, "harmonics": c.harmonics} for c in self.components
            ],
            "initial_state": _state_to_dict(self.initial_state),
            "final_state": _state_to_dict(self.final_state),
            "offset": self.offset,
            "train_origin": self.train_origin.isoformat(),
            "train_end": self.train_end.isoformat(),
            "n_observations": self.n_observations,
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "free_parameters": self.free_parameters,
            "converged": self.converged,
            "residuals": list(self.residuals),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TbatsModel":
        if payload.get("format") != MODEL_FORMAT:
            raise ValueError(f"unrecognized model format: {payload.get('format')!r}")
        if payload.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model version: {payload.get('version')!r}")
        raw = payload["params"]
        params = TbatsParams(
            omega=raw["omega"],
            alpha=raw["alpha"],
            beta=raw["beta"],
            phi=raw["phi"],
            long_run_trend=raw["long_run_trend"],
            gammas=tuple((a, b) for a, b in raw["gammas"]),
            ar_coeffs=tuple(raw["ar_coeffs"]),
            ma_coeffs=tuple(raw["ma_coeffs"]),
            noise_variance=raw["noise_variance"],
        )
        return cls(
            params=params,
            components=tuple(
                SeasonalComponentSpec(c["period"], c["harmonics"])
                for c in payload["components"]
            ),
            initial_state=_state_from_dict(payload["initial_state"]),
            final_state=_state_from_dict(payload["final_state"]),
            offset=payload["offset"],
            train_origin=datetime.fromisoformat(payload["train_origin"]),
            train_end=datetime.fromisoformat(payload["train_end"]),
            n_observations=payload["n_observations"],
            log_likelihood=payload["log_likelihood"],
            aic=payload["aic"],
            free_parameters=payload["free_parameters"],
            converged=payload["converged"],
            residuals=tuple(payload["residuals"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TbatsModel":
        return cls.from_dict(json.loads(text))


def _state_to_dict(state: TbatsState) -> dict:
    return {
        "level": state.level,
        "trend": state.trend,
        "harmonics": list(state.harmonics),
        "d_register": list(state.d_register),
        "e_register": list(state.e_register),
    }


def _state_from_dict(raw: dict) -> TbatsState:
    return TbatsState(
        level=raw["level"],
        trend=raw["trend"],
        harmonics=tuple(raw["harmonics"]),
        d_register=tuple(raw["d_register"]),
        e_register=tuple(raw["e_register"]),
    )


@_njit(cache=True)
def _filter_core(
    z,
    alpha,
    beta,
    phi,
    b_long,
    g1,
    g2,
    cosl,
    sinl,
    ar,
    ma,
    level0,
    trend0,
    harm0,
    d0,
    e0,
    record,
    out_states,
    out_resid,
):
    """One pass of the recursions over a transformed series.

    Returns (t, sse) where t is the index of the first non-finite step, or
    -1 if the pass completed. When ``record`` is set, out_states[t] receives
    the full post-update state at each step.
    """
    n = z.shape[0]
    p = ar.shape[0]
    q = ma.shape[0]
    npairs = g1.shape[0]
    level = level0
    trend = trend0
    harm = harm0.copy()
    dreg = d0.copy()
    ereg = e0.copy()
    sse = 0.0
    for t in range(n):
        dhat = 0.0
        for i in range(p):
            dhat += ar[i] * dreg[i]
        for j in range(q):
            dhat += ma[j] * ereg[j]
        ssum = 0.0
        for k in range(npairs):
            ssum += harm[2 * k]
        yhat = level + phi * trend + ssum + dhat
        eps = z[t] - yhat
        d = dhat + eps
        new_level = level + phi * trend + alpha * d
        new_trend = (1.0 - phi) * b_long + phi * trend + beta * d
        total = new_level + new_trend + d
        for k in range(npairs):
            s = harm[2 * k]
            ss = harm[2 * k + 1]
            c = cosl[k]
            sn = sinl[k]
            harm[2 * k] = s * c + ss * sn + g1[k] * d
            harm[2 * k + 1] = -s * sn + ss * c + g2[k] * d
            total += harm[2 * k] + harm[2 * k + 1]
        if not (math.isfinite(eps) and math.isfinite(total)):
            return t, sse
        for i in range(p - 1, 0, -1):
            dreg[i] = dreg[i - 1]
        if p > 0:
            dreg[0] = d
        for j in range(q - 1, 0, -1):
            ereg[j] = ereg[j - 1]
        if q > 0:
            ereg[0] = eps
        level = new_level
        trend = new_trend
        out_resid[t] = eps
        sse += eps * eps
        if record:
            out_states[t, 0] = level
            out_states[t, 1] = trend
            for k in range(2 * npairs):
                out_states[t, 2 + k] = harm[k]
            for i in range(p):
                out_states[t, 2 + 2 * npairs + i] = dreg[i]
            for j in range(q):
                out_states[t, 2 + 2 * npairs + p + j] = ereg[j]
    return -1, sse


def _transform_array(y: np.ndarray, omega: float) -> np.ndarray:
    # same stabilized form as box_cox()
    if omega == 0:
        return np.log(y)
    if omega == 1:
        return y - 1.0
    return np.expm1(omega * np.log(y)) / omega


def _expand_pairs(
    components: Sequence[SeasonalComponentSpec],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pair cos/sin factors and the index of the owning component."""
    cosl, sinl, owner = [], [], []
    for i, comp in enumerate(components):
        for lam in comp.angular_frequencies():
            cosl.append(math.cos(lam))
            sinl.append(math.sin(lam))
            owner.append(i)
    return (
        np.asarray(cosl, dtype=float),
        np.asarray(sinl, dtype=float),
        np.asarray(owner, dtype=np.intp),
    )


def _pair_gammas(
    params: TbatsParams, owner: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    if len(params.gammas) == 0:
        return np.zeros(0), np.zeros(0)
    gam = np.asarray(params.gammas, dtype=float)
    return gam[owner, 0], gam[owner, 1]


def concentrated_log_likelihood(sse: float, n: int) -> float:
    """Gaussian log-likelihood with the variance profiled out at SSE/n."""
    sigma2 = max(sse / n, 1e-300)
    return -0.5 * n * (math.log(TWO_PI * sigma2) + 1.0)


def tbats_filter(model: TbatsModel, series: HourlySeries) -> FilterResult:
    """Run the recursions over a series from the model's initial state.

    Residuals and the log-likelihood are in transformed space. Raises
    NumericalDivergenceError naming the first step that went non-finite.
    """
    values = np.asarray(series.values, dtype=float) + model.offset
    if np.any(values <= 0):
        raise ValueError("series must be positive after the model's offset")
    z = _transform_array(values, model.params.omega)
    cosl, sinl, owner = _expand_pairs(model.components)
    g1, g2 = _pair_gammas(model.params, owner)
    params = model.params
    s0 = model.initial_state
    n = len(z)
    dim = s0.dimension
    out_states = np.empty((n, dim), dtype=float)
    out_resid = np.empty(n, dtype=float)
    bad, sse = _filter_core(
        z,
        params.alpha,
        params.beta if params.beta is not None else 0.0,
        params.phi,
        params.long_run_trend,
        g1,
        g2,
        cosl,
        sinl,
        np.asarray(params.ar_coeffs, dtype=float),
        np.asarray(params.ma_coeffs, dtype=float),
        s0.level,
        s0.trend,
        np.asarray(s0.harmonics, dtype=float),
        np.asarray(s0.d_register, dtype=float),
        np.asarray(s0.e_register, dtype=float),
        True,
        out_states,
        out_resid,
    )
    if bad >= 0:
        raise NumericalDivergenceError(f"numerical divergence at t={bad}")
    npairs = len(cosl)
    p, q = params.p, params.q
    states = tuple(
        TbatsState(
            level=row[0],
            trend=row[1],
            harmonics=tuple(row[2 : 2 + 2 * npairs]),
            d_register=tuple(row[2 + 2 * npairs : 2 + 2 * npairs + p]),
            e_register=tuple(row[2 + 2 * npairs + p :]),
        )
        for row in out_states
    )
    residuals = tuple(float(e) for e in out_resid)
    fitted = tuple(float(zv - e) for zv, e in zip(z, out_resid))
    return FilterResult(
        states=states,
        residuals=residuals,
        fitted=fitted,
        sse=float(sse),
        log_likelihood=concentrated_log_likelihood(float(sse), n),
    )


# ---------------------------------------------------------------------------
# Fitting


@dataclass(frozen=True)
class TbatsSearch:
    """Bounds of the structure and parameter search."""

    max_p: int = 2
    max_q: int = 2
    max_harmonics: int = 5
    consider_trend: bool = True
    omega_range: tuple[float, float] = (0.0, 1.5)
    tolerance: float = 1e-8
    max_iterations: int = 2000

    def __post_init__(self) -> None:
        if self.max_p < 0 or self.max_q < 0 or self.max_harmonics < 1:
            raise ValueError("search bounds must be non-negative (harmonics >= 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class _Structure:
    """A point in the discrete search space."""

    periods: tuple[float, ...]
    harmonics: tuple[int, ...]
    use_trend: bool
    p: int
    q: int

    def components(self) -> tuple[SeasonalComponentSpec, ...]:
        return tuple(
            SeasonalComponentSpec(m, k) for m, k in zip(self.periods, self.harmonics)
        )


class _Layout:
    """Offsets of each parameter group inside the flat optimization vector."""

    def __init__(self, structure: _Structure):
        self.structure = structure
        n_comp = len(structure.periods)
        pairs = sum(structure.harmonics)
        pos = 0
        self.i_omega = pos
        pos += 1
        self.i_alpha = pos
        pos += 1
        if structure.use_trend:
            self.i_phi, self.i_beta, self.i_blong = pos, pos + 1, pos + 2
            pos += 3
        else:
            self.i_phi = self.i_beta = self.i_blong = -1
        self.i_gamma = pos
        pos += 2 * n_comp
        self.i_ar = pos
        pos += structure.p
        self.i_ma = pos
        pos += structure.q
        self.i_level = pos
        pos += 1
        if structure.use_trend:
            self.i_trend0 = pos
            pos += 1
        else:
            self.i_trend0 = -1
        self.i_harm = pos
        pos += 2 * pairs
        self.i_d0 = pos
        pos += structure.p
        self.i_e0 = pos
        pos += structure.q
        self.size = pos
        self.n_pairs = pairs
        self.n_comp = n_comp

    def decode(self, vec: np.ndarray) -> tuple[TbatsParams, TbatsState]:
        s = self.structure
        gammas = tuple(
            (float(vec[self.i_gamma + 2 * i]), float(vec[self.i_gamma + 2 * i + 1]))
            for i in range(self.n_comp)
        )
        params = TbatsParams(
            omega=float(vec[self.i_omega]),
            alpha=float(vec[self.i_alpha]),
            beta=float(vec[self.i_beta]) if s.use_trend else None,
            phi=float(vec[self.i_phi]) if s.use_trend else 1.0,
            long_run_trend=float(vec[self.i_blong]) if s.use_trend else 0.0,
            gammas=gammas,
            ar_coeffs=tuple(float(v) for v in vec[self.i_ar : self.i_ar + s.p]),
            ma_coeffs=tuple(float(v) for v in vec[self.i_ma : self.i_ma + s.q]),
        )
        state = TbatsState(
            level=float(vec[self.i_level]),
            trend=float(vec[self.i_trend0]) if s.use_trend else 0.0,
            harmonics=tuple(float(v) for v in vec[self.i_harm : self.i_harm + 2 * self.n_pairs]),
            d_register=tuple(float(v) for v in vec[self.i_d0 : self.i_d0 + s.p]),
            e_register=tuple(float(v) for v in vec[self.i_e0 : self.i_e0 + s.q]),
        )
        return params, state

    def bounds(self, omega_range: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.size, -np.inf)
        hi = np.full(self.size, np.inf)
        lo[self.i_omega], hi[self.i_omega] = omega_range
        lo[self.i_alpha], hi[self.i_alpha] = 1e-4, 0.9995
        if self.structure.use_trend:
            lo[self.i_phi], hi[self.i_phi] = 0.8, 1.0
            lo[self.i_beta], hi[self.i_beta] = 0.0, 0.9995
        for i in range(2 * self.n_comp):
            lo[self.i_gamma + i], hi[self.i_gamma + i] = -0.5, 0.5
        for i in range(self.structure.p):
            lo[self.i_ar + i], hi[self.i_ar + i] = -0.999, 0.999
        for i in range(self.structure.q):
            lo[self.i_ma + i], hi[self.i_ma + i] = -0.999, 0.999
        return lo, hi


def _fourier_seed(z: np.ndarray, structure: _Structure) -> np.ndarray:
    """Least-squares harmonic coefficients on the de-leveled first window."""
    if not structure.periods:
        return np.zeros(0)
    window = min(len(z), 2 * math.ceil(max(structure.periods)))
    zw = z[:window] - z[:window].mean()
    tt = np.arange(window, dtype=float)
    cols = []
    for m, k in zip(structure.periods, structure.harmonics):
        for j in range(1, k + 1):
            lam = TWO_PI * j / m
            cols.append(np.cos(lam * tt))
            cols.append(np.sin(lam * tt))
    design = np.column_stack(cols)
    coeffs, *_ = np.linalg.lstsq(design, zw, rcond=None)
    return coeffs


def _initial_vector(z: np.ndarray, structure: _Structure, layout: _Layout) -> np.ndarray:
    """Documented starting point: omega 1, small positive smoothing
    parameters, level from the first two seasonal cycles, harmonic seeds from
    a Fourier regression, registers at zero."""
    vec = np.zeros(layout.size)
    vec[layout.i_omega] = 1.0
    vec[layout.i_alpha] = 0.09
    if structure.use_trend:
        vec[layout.i_phi] = 0.98
        vec[layout.i_beta] = 0.01
        vec[layout.i_blong] = 0.0
    for i in range(layout.n_comp):
        vec[layout.i_gamma + 2 * i] = 0.001
        vec[layout.i_gamma + 2 * i + 1] = 0.001
    for i in range(structure.p):
        vec[layout.i_ar + i] = 0.05
    for i in range(structure.q):
        vec[layout.i_ma + i] = 0.05
    if structure.periods:
        window = min(len(z), 2 * math.ceil(max(structure.periods)))
        vec[layout.i_level] = z[:window].mean()
        vec[layout.i_harm : layout.i_harm + 2 * layout.n_pairs] = _fourier_seed(z, structure)
    else:
        vec[layout.i_level] = z.mean()
    return vec


@dataclass(frozen=True)
class _CandidateFit:
    structure: _Structure
    layout: _Layout
    vector: np.ndarray
    log_likelihood: float  # Jacobian-adjusted
    aic: float
    converged: bool


def _make_objective(
    layout: _Layout,
    y_off: np.ndarray,
    sum_log: float,
    omega_range: tuple[float, float],
):
    structure = layout.structure
    components = structure.components()
    cosl, sinl, owner = _expand_pairs(components)
    lo, hi = layout.bounds(omega_range)
    n = len(y_off)
    dummy_states = np.empty((1, 1), dtype=float)
    resid_buf = np.empty(n, dtype=float)
    p, q = structure.p, structure.q

    def objective(vec: np.ndarray) -> float:
        viol = float(np.clip(lo - vec, 0, None).sum() + np.clip(vec - hi, 0, None).sum())
        if viol > 0:
            return 1e12 * (1.0 + viol)
        ar = vec[layout.i_ar : layout.i_ar + p]
        ma = vec[layout.i_ma : layout.i_ma + q]
        if not (_poly_roots_outside_unit(ar, -1.0) and _poly_roots_outside_unit(ma, +1.0)):
            return 1e12
        omega = float(vec[layout.i_omega])
        z = _transform_array(y_off, omega)
        if layout.n_pairs:
            gam = vec[layout.i_gamma : layout.i_gamma + 2 * layout.n_comp].reshape(-1, 2)
            g1 = gam[owner, 0]
            g2 = gam[owner, 1]
        else:
            g1 = g2 = np.zeros(0)
        bad, sse = _filter_core(
            z,
            float(vec[layout.i_alpha]),
            float(vec[layout.i_beta]) if structure.use_trend else 0.0,
            float(vec[layout.i_phi]) if structure.use_trend else 1.0,
            float(vec[layout.i_blong]) if structure.use_trend else 0.0,
            g1,
            g2,
            cosl,
            sinl,
            np.ascontiguousarray(ar),
            np.ascontiguousarray(ma),
            float(vec[layout.i_level]),
            float(vec[layout.i_trend0]) if structure.use_trend else 0.0,
            np.ascontiguousarray(vec[layout.i_harm : layout.i_harm + 2 * layout.n_pairs]),
            np.ascontiguousarray(vec[layout.i_d0 : layout.i_d0 + p]),
            np.ascontiguousarray(vec[layout.i_e0 : layout.i_e0 + q]),
            False,
            dummy_states,
            resid_buf,
        )
        if bad >= 0 or not math.isfinite(sse):
            return 1e13
        ll = concentrated_log_likelihood(sse, n) + (omega - 1.0) * sum_log
        return -ll

    return objective


def _fit_candidate(
    structure: _Structure,
    y_off: np.ndarray,
    sum_log: float,
    search: TbatsSearch,
) -> _CandidateFit:
    """Nelder-Mead from the documented seeds, restarted once from the
    first minimum."""
    layout = _Layout(structure)
    z1 = _transform_array(y_off, 1.0)
    objective = _make_objective(layout, y_off, sum_log, search.omega_range)
    vec = _initial_vector(z1, structure, layout)
    options = {
        "fatol": search.tolerance,
        "xatol": 1e-6,
        "maxiter": search.max_iterations,
        "maxfev": 2 * search.max_iterations,
    }
    best = minimize(objective, vec, method="Nelder-Mead", options=options)
    rerun = minimize(objective, best.x, method="Nelder-Mead", options=options)
    if rerun.fun <= best.fun:
        best = rerun
    ll = -float(best.fun)
    k_free = layout.size + 1  # + concentrated variance
    return _CandidateFit(
        structure=structure,
        layout=layout,
        vector=np.asarray(best.x, dtype=float),
        log_likelihood=ll,
        aic=-2.0 * ll + 2.0 * k_free,
        converged=bool(best.success),
    )


def _candidate_residuals(fit: _CandidateFit, y_off: np.ndarray) -> np.ndarray:
    params, state0 = fit.layout.decode(fit.vector)
    z = _transform_array(y_off, params.omega)
    cosl, sinl, owner = _expand_pairs(fit.structure.components())
    g1, g2 = _pair_gammas(params, owner)
    resid = np.empty(len(z), dtype=float)
    bad, _ = _filter_core(
        z,
        params.alpha,
        params.beta if params.beta is not None else 0.0,
        params.phi,
        params.long_run_trend,
        g1,
        g2,
        cosl,
        sinl,
        np.asarray(params.ar_coeffs, dtype=float),
        np.asarray(params.ma_coeffs, dtype=float),
        state0.level,
        state0.trend,
        np.asarray(state0.harmonics, dtype=float),
        np.asarray(state0.d_register, dtype=float),
        np.asarray(state0.e_register, dtype=float),
        False,
        np.empty((1, 1), dtype=float),
        resid,
    )
    if bad >= 0:
        raise NumericalDivergenceError(f"numerical divergence at t={bad}")
    return resid


def _select_arma_orders(resid: np.ndarray, search: TbatsSearch) -> tuple[int, int]:
    """Cheap pre-screen: fit each (p, q) directly to the residual series by
    conditional least squares and rank by AIC. The winner is then refit
    jointly with the full model before being accepted."""
    n = len(resid)
    best = (0, 0)
    best_aic = -2.0 * concentrated_log_likelihood(float(resid @ resid), n) + 2.0
    resid_buf = np.empty(n, dtype=float)
    dummy = np.empty((1, 1), dtype=float)
    zeros0 = np.zeros(0)
    for p in range(search.max_p + 1):
        for q in range(search.max_q + 1):
            if p == 0 and q == 0:
                continue

            def objective(vec: np.ndarray, p: int = p, q: int = q) -> float:
                ar, ma = vec[:p], vec[p:]
                if np.any(np.abs(vec) > 0.999):
                    return 1e12
                if not (
                    _poly_roots_outside_unit(ar, -1.0)
                    and _poly_roots_outside_unit(ma, +1.0)
                ):
                    return 1e12
                bad, sse = _filter_core(
                    resid, 0.0, 0.0, 1.0, 0.0, zeros0, zeros0, zeros0, zeros0,
                    np.ascontiguousarray(ar), np.ascontiguousarray(ma),
                    0.0, 0.0, zeros0, np.zeros(p), np.zeros(q),
                    False, dummy, resid_buf,
                )
                if bad >= 0 or not math.isfinite(sse):
                    return 1e13
                return -concentrated_log_likelihood(sse, n)

            start = np.full(p + q, 0.05)
            res = minimize(
                objective,
                start,
                method="Nelder-Mead",
                options={"fatol": search.tolerance, "maxiter": 500},
            )
            aic = 2.0 * float(res.fun) + 2.0 * (p + q + 1)
            if aic < best_aic - 1e-9:
                best_aic = aic
                best = (p, q)
    return best


def tbats_fit(
    series: HourlySeries,
    periods: Sequence[float],
    search: TbatsSearch | None = None,
) -> TbatsModel:
    """Fit the model to an hourly series.

    Discrete structure (harmonic counts, trend, ARMA orders) is chosen by
    AIC: harmonics by coordinate ascent from k=1, trend by direct comparison,
    ARMA orders by a residual pre-screen followed by one joint refit. A
    level-only null model is always in the candidate set, so the returned
    AIC never exceeds the null AIC. Zero-valued hours are handled by a +1
    offset recorded on the model.
    """
    search = search or TbatsSearch()
    periods = tuple(float(m) for m in periods)
    for m in periods:
        if m < 2:
            raise ValueError(f"seasonal periods must be >= 2, got {m}")
    if len(set(periods)) != len(periods):
        raise ValueError("seasonal periods must be distinct")
    if periods and len(series) < 2 * max(periods):
        raise ValueError(
            f"history too short: need >= {2 * max(periods):.0f} hours "
            f"for the longest period, got {len(series)}"
        )
    if len(series) < 4:
        raise ValueError("history too short to fit")
    values = np.asarray(series.values, dtype=float)
    offset = 1.0 if float(values.min()) <= 0 else 0.0
    y_off = values + offset
    sum_log = float(np.log(y_off).sum())

    def fit(structure: _Structure) -> _CandidateFit:
        return _fit_candidate(structure, y_off, sum_log, search)

    candidates: list[_CandidateFit] = []
    null_structure = _Structure((), (), False, 0, 0)
    candidates.append(fit(null_structure))

    best: _CandidateFit | None = None
    if periods:
        kmax = tuple(
            min(search.max_harmonics, math.floor(m / 2)) for m in periods
        )
        k = [1] * len(periods)
        best = fit(_Structure(periods, tuple(k), False, 0, 0))
        seen = {tuple(k)}
        improved = True
        while improved:
            improved = False
            proposals = []
            for i in range(len(periods)):
                if k[i] + 1 <= kmax[i]:
                    proposals.append(tuple(k[:i] + [k[i] + 1] + k[i + 1 :]))
                if k[i] - 1 >= 1:
                    proposals.append(tuple(k[:i] + [k[i] - 1] + k[i + 1 :]))
            for cand_k in proposals:
                if cand_k in seen:
                    continue
                seen.add(cand_k)
                trial = fit(_Structure(periods, cand_k, False, 0, 0))
                candidates.append(trial)
                if trial.aic < best.aic - 1e-9:
                    best = trial
                    k = list(cand_k)
                    improved = True
                    break
        candidates.append(best)

    base = min(candidates, key=lambda c: c.aic)
    if search.consider_trend:
        trended = fit(
            _Structure(base.structure.periods, base.structure.harmonics, True, 0, 0)
        )
        candidates.append(trended)
        base = min(base, trended, key=lambda c: c.aic)

    if search.max_p or search.max_q:
        resid = _candidate_residuals(base, y_off)
        p, q = _select_arma_orders(resid, search)
        if (p, q) != (0, 0):
            joint = fit(
                _Structure(
                    base.structure.periods,
                    base.structure.harmonics,
                    base.structure.use_trend,
                    p,
                    q,
                )
            )
            candidates.append(joint)

    winner = min(candidates, key=lambda c: c.aic)
    params, state0 = winner.layout.decode(winner.vector)

    # one recorded pass for diagnostics and the end-of-training state
    provisional = TbatsModel(
        params=params,
        components=winner.structure.components(),
        initial_state=state0,
        final_state=state0,
        offset=offset,
        train_origin=series.origin,
        train_end=series.end,
        n_observations=len(series),
        log_likelihood=winner.log_likelihood,
        aic=winner.aic,
        free_parameters=winner.layout.size + 1,
        converged=winner.converged,
    )
    run = tbats_filter(provisional, series)
    sigma2 = max(run.sse / len(series), 1e-300)
    return replace(
        provisional,
        params=replace(params, noise_variance=sigma2),
        final_state=run.states[-1],
        residuals=run.residuals,
    )


def tbats_forecast(
    model: TbatsModel,
    horizon_hours: int,
    state: TbatsState | None = None,
    origin: datetime | None = None,
) -> HourlySeries:
    """Iterate the recursions with zero innovations for ``horizon_hours``
    steps and map back through the inverse transform.

    By default continues from the end of the training window; pass an
    explicit ``state`` (e.g. from a later filter pass) and matching
    ``origin`` to forecast from elsewhere.
    """
    if horizon_hours <= 0:
        raise ValueError(f"horizon must be positive, got {horizon_hours}")
    if state is None:
        state = model.final_state
    if origin is None:
        origin = model.train_end
    params = model.params
    cosl, sinl, owner = _expand_pairs(model.components)
    g1, g2 = _pair_gammas(params, owner)
    alpha = params.alpha
    beta = params.beta if params.beta is not None else 0.0
    phi = params.phi
    b_long = params.long_run_trend
    ar = params.ar_coeffs
    ma = params.ma_coeffs
    level = state.level
    trend = state.trend
    harm = list(state.harmonics)
    dreg = list(state.d_register)
    ereg = list(state.e_register)
    omega = params.omega
    out = []
    for _ in range(horizon_hours):
        dhat = sum(a * dv for a, dv in zip(ar, dreg)) + sum(
            m * ev for m, ev in zip(ma, ereg)
        )
        zhat = level + phi * trend + sum(harm[0::2]) + dhat
        # zero-innovation update: d_t reduces to its predictable part
        level = level + phi * trend + alpha * dhat
        trend = (1.0 - phi) * b_long + phi * trend + beta * dhat
        for kp in range(len(cosl)):
            s, ss = harm[2 * kp], harm[2 * kp + 1]
            harm[2 * kp] = s * cosl[kp] + ss * sinl[kp] + g1[kp] * dhat
            harm[2 * kp + 1] = -s * sinl[kp] + ss * cosl[kp] + g2[kp] * dhat
        if dreg:
            dreg = [dhat] + dreg[:-1]
        if ereg:
            ereg = [0.0] + ereg[:-1]
        if omega != 0 and 1.0 + omega * zhat <= 0:
            y = 0.0
        else:
            y = inverse_box_cox(zhat, omega)
        out.append(max(y - model.offset, 0.0))
    return HourlySeries(origin, tuple(out))


def write_model(model: TbatsModel, sink: IO[str]) -> None:
    sink.write(model.to_json())
    sink.write("\n")


def read_model(source: IO[str]) -> TbatsModel:
    return TbatsModel.from_json(source.read())
