"""Disposal-shift scheduling: buffers against fixed supply, then an exact
set-covering solve.

Supply is the base fleet plus the in-house 12-hour shifts (whose overnight
tails wrap into the early slots under a steady-state assumption). The buffer
is the ceiling of the forecast minus supply, floored at zero. Disposal
activation is branch and bound over shift patterns taken in lexicographic
order: each node solves a continuous relaxation (committed shifts priced
exactly, uncommitted activations relaxed to capacity-capped unit-cost
coverage) and prunes on the bound; at covering assignments the inner driver
counts come from a bounded-variable LP whose interval structure makes the
vertex integral. Returned schedules are provably optimal in driver-hours.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .boundedlp import LpStatus, solve_lp, solve_lp_unchecked, _solve_core
from .demand import HourlySeries

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised where numba is absent
    _HAVE_NUMBA = False

    def _njit(**_kwargs):
        def decorate(fn):
            return fn

        return decorate

SLOTS_PER_DAY = 24
DEFAULT_MAX_DRIVERS_PER_SHIFT = 60
DEFAULT_MAX_ACTIVE_SHIFTS = 6
DISPOSAL_START_SLOTS = range(0, 19)  # 5am through 11pm
DISPOSAL_LENGTHS = range(3, 9)


class InfeasibleScheduleError(ValueError):
    def __init__(self, slot: int, message: str) -> None:
        super().__init__(message)
        self.slot = slot


@dataclass(frozen=True)
class InHouseShift:
    start_slot: int
    length: int = 12
    headcount: int = 10

    def __post_init__(self) -> None:
        if self.length != 12:
            raise ValueError("in-house shifts are fixed at 12 hours")
        if self.headcount < 0:
            raise ValueError("headcount must be >= 0")
        if not 0 <= self.start_slot < SLOTS_PER_DAY:
            raise ValueError("start slot out of range")


def _default_in_house() -> tuple[InHouseShift, ...]:
    # 8am, 11am, 1pm and 9pm in planning slots (day starts at 5am)
    return (
        InHouseShift(3),
        InHouseShift(6),
        InHouseShift(8),
        InHouseShift(16),
    )


@dataclass(frozen=True)
class FleetConfig:
    in_house_shifts: tuple[InHouseShift, ...] = field(default_factory=_default_in_house)
    base_fleet: int = 10

    def __post_init__(self) -> None:
        if self.base_fleet < 0:
            raise ValueError("base fleet must be >= 0")


def compute_supply(config: FleetConfig) -> tuple[int, ...]:
    """Vehicles on duty per planning slot.

    In-house shifts wrap modulo 24: yesterday's overnight shift covers
    today's early slots, so the profile is the steady-state one.
    """
    supply = [config.base_fleet] * SLOTS_PER_DAY
    for shift in config.in_house_shifts:
        for offset in range(shift.length):
            supply[(shift.start_slot + offset) % SLOTS_PER_DAY] += shift.headcount
    return tuple(supply)


@dataclass(frozen=True)
class BufferProfile:
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        for v in self.values:
            if not isinstance(v, int) or v < 0:
                raise ValueError("buffer values must be non-negative integers")

    def __len__(self) -> int:
        return len(self.values)


def compute_buffer(forecast, supply: Sequence[int]) -> BufferProfile:
    """b(t) = max(0, ceil(forecast(t)) - supply(t)) over one planning day."""
    values = forecast.values if isinstance(forecast, HourlySeries) else tuple(forecast)
    if len(values) != len(supply):
        raise ValueError("forecast and supply must cover the same slots")
    buffer = []
    for f, s in zip(values, supply):
        # shed float dust (e.g. 45.000000000001) before taking the ceiling
        needed = math.ceil(round(float(f), 9))
        buffer.append(max(0, needed - int(s)))
    return BufferProfile(tuple(buffer))


@dataclass(frozen=True)
class ShiftPattern:
    index: int
    start: int
    length: int

    @property
    def end(self) -> int:
        return self.start + self.length

    def covered_slots(self, horizon: int, wrap: bool = False) -> tuple[int, ...]:
        if wrap:
            return tuple((self.start + k) % horizon for k in range(self.length))
        return tuple(range(self.start, min(self.end, horizon)))


def generate_patterns(
    start_slots: Iterable[int] = DISPOSAL_START_SLOTS,
    lengths: Iterable[int] = DISPOSAL_LENGTHS,
) -> tuple[ShiftPattern, ...]:
    """All candidate disposal shifts, ordered lexicographically by
    (start, length). The defaults give the full 114-pattern set."""
    combos = sorted((s, l) for s in start_slots for l in lengths)
    return tuple(ShiftPattern(i, s, l) for i, (s, l) in enumerate(combos))


@dataclass(frozen=True)
class ScheduleProblem:
    buffer: BufferProfile
    patterns: tuple[ShiftPattern, ...] = field(default_factory=generate_patterns)
    max_drivers_per_shift: int = DEFAULT_MAX_DRIVERS_PER_SHIFT
    max_active_shifts: int = DEFAULT_MAX_ACTIVE_SHIFTS
    wrap: bool = False

    def __post_init__(self) -> None:
        if self.max_drivers_per_shift <= 0 or self.max_active_shifts <= 0:
            raise ValueError("shift capacity limits must be positive")

    @property
    def horizon(self) -> int:
        return len(self.buffer)

    def coverage_matrix(self) -> np.ndarray:
        a = np.zeros((self.horizon, len(self.patterns)))
        for j, p in enumerate(self.patterns):
            for t in p.covered_slots(self.horizon, self.wrap):
                a[t, j] = 1.0
        return a


@dataclass(frozen=True)
class ScheduleSolution:
    drivers: tuple[int, ...]  # x_j per pattern
    active: tuple[bool, ...]  # y_j per pattern
    objective: int  # total driver-hours
    coverage: tuple[int, ...]  # per slot
    optimal: bool

    def activations(self, patterns: Sequence[ShiftPattern]) -> list[tuple[ShiftPattern, int]]:
        return [(patterns[j], x) for j, x in enumerate(self.drivers) if x > 0]


def evaluate_assignment(
    problem: ScheduleProblem, drivers: Sequence[int], optimal: bool = False
) -> ScheduleSolution:
    """Build a solution record for an explicit (possibly manual) assignment.

    Does not require feasibility; coverage is reported as-is so that
    compare_schedules can flag uncovered slots.
    """
    if len(drivers) != len(problem.patterns):
        raise ValueError("one driver count per pattern required")
    x = tuple(int(v) for v in drivers)
    if any(v < 0 for v in x):
        raise ValueError("driver counts must be >= 0")
    a = problem.coverage_matrix()
    coverage = tuple(int(v) for v in (a @ np.array(x, dtype=float)).round().astype(int))
    objective = sum(p.length * v for p, v in zip(problem.patterns, x))
    return ScheduleSolution(
        drivers=x,
        active=tuple(v > 0 for v in x),
        objective=objective,
        coverage=coverage,
        optimal=optimal,
    )


def _capacity_precheck(problem: ScheduleProblem) -> None:
    b = problem.buffer.values
    m_cap = problem.max_drivers_per_shift
    n_cap = problem.max_active_shifts
    counts = [0] * problem.horizon
    for p in problem.patterns:
        for t in p.covered_slots(problem.horizon, problem.wrap):
            counts[t] += 1
    for t, need in enumerate(b):
        ceiling = m_cap * min(n_cap, counts[t])
        if need > ceiling:
            raise InfeasibleScheduleError(
                t,
                f"infeasible: buffer {need} at slot {t} exceeds the maximum "
                f"coverage {ceiling} ({n_cap} shifts x {m_cap} drivers)",
            )


def _finish(problem: ScheduleProblem, drivers: np.ndarray, objective: int) -> ScheduleSolution:
    a = problem.coverage_matrix()
    coverage = tuple(int(v) for v in (a @ drivers.astype(float)).round().astype(int))
    return ScheduleSolution(
        drivers=tuple(int(v) for v in drivers),
        active=tuple(bool(v > 0) for v in drivers),
        objective=int(objective),
        coverage=coverage,
        optimal=True,
    )


def solve_schedule(problem: ScheduleProblem) -> ScheduleSolution:
    """Minimize total driver-hours subject to coverage, the per-shift driver
    cap M and the activation cap N. Provably optimal and deterministic;
    ties fall to the lexicographically earlier activation set."""
    _capacity_precheck(problem)
    if not any(problem.buffer.values):
        return ScheduleSolution(
            drivers=(0,) * len(problem.patterns),
            active=(False,) * len(problem.patterns),
            objective=0,
            coverage=(0,) * problem.horizon,
            optimal=True,
        )
    if problem.wrap:
        return _solve_generic(problem)
    return _solve_ordered(problem)


class _Candidate:
    """A pattern the solver may activate, after dominance trimming."""

    __slots__ = ("pattern", "start", "length", "slots", "cap", "covered")

    def __init__(
        self,
        pattern: ShiftPattern | None,
        slots: tuple[int, ...],
        covered: frozenset,
        start: int = 0,
        length: int = 0,
    ):
        # pattern is None for the clipped stand-ins that exist only inside
        # lower-bound universes and never enter a real assignment
        self.pattern = pattern
        self.start = pattern.start if pattern is not None else start
        self.length = pattern.length if pattern is not None else length
        self.slots = slots
        self.covered = covered  # deficit slots inside the span
        self.cap = 0


class _Universe:
    """One candidate pool for the search: coverage matrix and per-shift
    arrays over the shared deficit rows."""

    __slots__ = (
        "cands", "cov", "cost", "cap", "inv_cap", "starts", "ends", "n", "dup",
        "reach", "end_row",
    )

    def __init__(self, cands: list[_Candidate], n_rows: int, row_of: dict[int, int]):
        self.cands = cands
        self.n = len(cands)
        self.cov = np.zeros((n_rows, self.n))
        for j, c in enumerate(cands):
            for t in c.covered:
                self.cov[row_of[t], j] = 1.0
        self.cost = np.array([float(c.length) for c in cands])
        self.cap = np.array([float(c.cap) for c in cands])
        self.starts = [c.start for c in cands]
        self.ends = np.array([c.slots[-1] + 1 for c in cands])
        # end_row[j]: first deficit row at or past the end of span j
        rows_sorted = np.fromiter(row_of.keys(), dtype=np.int64, count=n_rows)
        self.end_row = np.searchsorted(rows_sorted, self.ends, side="left")
        # interchangeable duplicates (stacked stand-in copies): the search
        # may take them only in list order
        self.dup = [
            j > 0
            and cands[j].start == cands[j - 1].start
            and cands[j].length == cands[j - 1].length
            and cands[j].covered == cands[j - 1].covered
            for j in range(self.n)
        ]
        self.inv_cap = 1.0 / self.cap
        # reach[j][t]: furthest end over shifts at or past list position j
        # whose span contains slot t (0 when none does)
        horizon = 1 + max((c.slots[-1] for c in cands), default=0)
        self.reach = np.zeros((self.n + 1, horizon), dtype=np.int64)
        for j in range(self.n - 1, -1, -1):
            row = self.reach[j]
            row[:] = self.reach[j + 1]
            e = cands[j].slots[-1] + 1
            s = cands[j].start
            np.maximum(row[s:e], e, out=row[s:e])


@_njit(cache=True)
def _node_lp_core(cov, costv, cap, inv_cap, b_rows, chosen, j_lo, j_hi,
                  k_budget, r0, r1, end_row, max_iterations):
    """Assemble and solve one node relaxation: chosen columns forced active,
    columns j_lo..j_hi-1 optional under an aggregate activation row weighted
    by inv_cap. Coverage rows are deficit rows r0..r1-1.

    Besides the LP outcome, reports the largest fractional part over the
    decision columns and how many optional columns round to a positive
    level, so callers can recognize integral vertices without re-scanning.
    """
    nch = chosen.shape[0]
    nrem = j_hi - j_lo
    ncols = nch + nrem
    rows = r1 - r0
    extra = 1 if nrem > 0 else 0
    a = np.empty((rows + extra, ncols))
    c = np.empty(ncols)
    lo = np.zeros(ncols)
    hi = np.empty(ncols)
    bu = np.empty(rows + extra)
    for k in range(nch):
        j = chosen[k]
        c[k] = costv[j]
        lo[k] = 1.0
        hi[k] = cap[j]
        for i in range(rows):
            a[i, k] = -cov[r0 + i, j]
        if extra == 1:
            a[rows, k] = 0.0
    for k in range(nrem):
        j = j_lo + k
        kk = nch + k
        c[kk] = costv[j]
        hi[kk] = cap[j]
        for i in range(rows):
            a[i, kk] = -cov[r0 + i, j]
        if extra == 1:
            a[rows, kk] = inv_cap[j]
    for i in range(rows):
        bu[i] = -b_rows[r0 + i]
    if extra == 1:
        bu[rows] = k_budget

    # Starting corner: every column staffs at most its deepest covered
    # deficit, so chosen columns at cap plus a greedy sweep of covering
    # columns at cap meet every coverage row; phase one then only has the
    # budget row left to check, and usually nothing at all.
    init = np.zeros(ncols, np.uint8)
    for k in range(nch):
        init[k] = 1
    if rows > 0:
        rowdone = np.zeros(rows, np.uint8)
        for k in range(nch):
            j = chosen[k]
            for i in range(rows):
                if cov[r0 + i, j] > 0.0:
                    rowdone[i] = 1
        r = 0
        while r < rows:
            if rowdone[r] == 1:
                r += 1
                continue
            best_j = -1
            best_end = r0 + r
            for j in range(j_lo, j_hi):
                if cov[r0 + r, j] > 0.0 and end_row[j] > best_end:
                    best_end = end_row[j]
                    best_j = j
            if best_j == -1:
                # nothing reaches this deficit row: the LP is infeasible
                return 1, np.zeros(0), 0.0, np.zeros(0), 0.0, 0
            init[nch + (best_j - j_lo)] = 1
            r = best_end - r0 if best_end - r0 > r + 1 else r + 1

    code, x, obj, rc = _solve_core(c, a, bu, lo, hi, max_iterations, init)
    if code != 0:
        return code, x, obj, rc, 0.0, 0
    max_frac = 0.0
    n_pos = 0
    for j in range(ncols):
        xi = x[j]
        xr = np.rint(xi)
        diff = xi - xr if xi >= xr else xr - xi
        if diff > max_frac:
            max_frac = diff
        if j >= nch and xr > 0.5:
            n_pos += 1
    return 0, x, obj, rc, max_frac, n_pos


def _trim_candidates(problem: ScheduleProblem, b: Sequence[int]) -> list[_Candidate]:
    horizon = problem.horizon
    m_cap = problem.max_drivers_per_shift
    n_cap = problem.max_active_shifts
    pool: list[_Candidate] = []
    for p in sorted(problem.patterns, key=lambda q: (q.start, q.length, q.index)):
        slots = tuple(range(p.start, min(p.end, horizon)))
        covered = frozenset(t for t in slots if b[t] > 0)
        if not covered:
            continue
        c = _Candidate(p, slots, covered)
        # an optimal solution never staffs above the deepest deficit covered
        c.cap = min(m_cap, max(b[t] for t in covered))
        pool.append(c)

    # shifts covering the same deficit slots are interchangeable up to their
    # shared cap; a deficit deeper than the cap still needs stacked copies,
    # so keep the k cheapest where k copies at cap reach the deepest slot
    groups: dict[frozenset, list[tuple[int, int, int]]] = {}
    for j, cj in enumerate(pool):
        groups.setdefault(cj.covered, []).append((cj.length, cj.start, j))
    allowed: set[int] = set()
    for covered, members in groups.items():
        peak = max(b[t] for t in covered)
        k = 1 if peak <= m_cap else min(n_cap, -(-peak // m_cap))
        for _, _, j in sorted(members)[:k]:
            allowed.add(j)

    out = []
    for j, cj in enumerate(pool):
        if j not in allowed:
            continue
        # folding a shift into a cheaper cover of strictly more deficit slots
        # is only sound when that cover can absorb its whole run alone, i.e.
        # its run peak fits under the per-shift staffing cap
        dominated = any(
            ci.covered > cj.covered
            and max(b[t] for t in ci.covered) <= m_cap
            and (ci.length, ci.start, i) < (cj.length, cj.start, j)
            for i, ci in enumerate(pool)
            if i != j
        )
        if not dominated:
            out.append(cj)
    return out


def _greedy_cover_count(deficit: Sequence[int], candidates: Sequence[_Candidate]) -> int | None:
    """Minimum number of candidate intervals needed to touch every deficit
    slot (classic left-to-right sweep; exact for intervals)."""
    remaining = sorted(deficit)
    used = 0
    i = 0
    while i < len(remaining):
        t = remaining[i]
        reach = -1
        for c in candidates:
            if c.start <= t < c.slots[-1] + 1:
                reach = max(reach, c.slots[-1])
        if reach < t:
            return None
        used += 1
        while i < len(remaining) and remaining[i] <= reach:
            i += 1
    return used


def _cover_need(
    u: _Universe, next_index: int, points: Sequence[int], i0: int = 0
) -> int | None:
    """_greedy_cover_count against the tail of a universe's pool, answered
    from its precomputed reach table. Only points[i0:] are required."""
    row = u.reach[next_index]
    width = row.shape[0]
    n = len(points)
    used = 0
    i = i0
    while i < n:
        t = points[i]
        if t >= width or row[t] <= t:
            return None
        used += 1
        reach = row[t]
        while i < n and points[i] < reach:
            i += 1
    return used


def _partition_heuristic(
    b: Sequence[int],
    candidates: Sequence[_Candidate],
    n_cap: int,
    horizon: int,
    t_start: int = 0,
) -> tuple[int, dict[int, tuple[_Candidate, int]]] | None:
    """Upper bound: cover deficit runs with non-stacked shifts chosen by a
    small DP over (slot, shifts used). Returns (cost, {id->(candidate, drivers)})."""
    covering: dict[int, list[_Candidate]] = {}
    for c in candidates:
        covering.setdefault(c.slots[0], []).append(c)

    memo: dict[tuple[int, int], tuple[int, tuple] | None] = {}

    def best(t: int, k: int):
        while t < horizon and b[t] == 0:
            t += 1
        if t >= horizon:
            return 0, ()
        if k == 0:
            return None
        key = (t, k)
        if key in memo:
            return memo[key]
        result = None
        # any shift whose span contains t can take this deficit run
        for start in range(max(0, t - 7), t + 1):
            for c in covering.get(start, ()):
                if c.slots[-1] < t:
                    continue
                height = max(b[s] for s in c.slots)
                if height > c.cap:
                    continue  # one shift cannot staff this deep a deficit
                rest = best(c.slots[-1] + 1, k - 1)
                if rest is None:
                    continue
                cost = c.length * height + rest[0]
                if result is None or cost < result[0]:
                    result = (cost, ((c, height),) + rest[1])
        memo[key] = result
        return result

    solution = best(t_start, n_cap)
    if solution is None:
        return None
    cost, picks = solution
    return cost, {id(c): (c, h) for c, h in picks}


# branch pruning via the boundary-split lower bound; switchable for debugging
_SPLIT_PRUNE = True


def _solve_ordered(problem: ScheduleProblem) -> ScheduleSolution:
    b = problem.buffer.values
    horizon = problem.horizon
    n_cap = problem.max_active_shifts
    m_cap = problem.max_drivers_per_shift
    candidates = _trim_candidates(problem, b)
    deficit = [t for t in range(horizon) if b[t] > 0]

    need = _greedy_cover_count(deficit, candidates)
    if need is None or need > n_cap:
        raise InfeasibleScheduleError(
            deficit[0],
            f"infeasible: no activation of at most {n_cap} shifts covers the "
            f"buffer (first unmet slot {deficit[0]})",
        )

    n_rows = len(deficit)
    row_of = {t: i for i, t in enumerate(deficit)}
    b_rows = np.array([float(b[t]) for t in deficit])

    u_full = _Universe(candidates, n_rows, row_of)
    bound_univs: dict[int, _Universe] = {}
    clip_costs: dict[tuple[int, int], np.ndarray] = {}

    def bound_universe(g: int) -> _Universe:
        """Shifts usable at or past slot g, plus clipped stand-ins for every
        span a straddling shift could contribute past g. Lower bounds only:
        the stand-ins are not real patterns."""
        u = bound_univs.get(g)
        if u is not None:
            return u
        j0 = bisect.bisect_left(u_full.starts, g)
        last = g
        for c in candidates:
            if c.start >= g:
                break
            last = max(last, c.slots[-1] + 1)
        virt = []
        for e in range(g + 1, last + 1):
            slots = tuple(range(g, e))
            covered = frozenset(t for t in slots if b[t] > 0)
            if not covered:
                continue
            peak = max(b[t] for t in covered)
            # deficits deeper than the cap need stacked straddlers, so the
            # stand-in must exist in as many copies as a stack can use
            copies = 1 if peak <= m_cap else min(n_cap, -(-peak // m_cap))
            for _ in range(copies):
                v = _Candidate(None, slots, covered, start=g, length=e - g)
                v.cap = min(m_cap, peak)
                virt.append(v)
        pool = sorted(virt + candidates[j0:], key=lambda c: (c.start, c.length))
        u = _Universe(pool, n_rows, row_of)
        bound_univs[g] = u
        return u

    def node_lp(u: _Universe, chosen_idx: list[int], next_index: int,
                k_left: int, r0: int, r1: int):
        """Relaxation for a subtree over deficit rows [r0, r1): chosen shifts
        are active (at least one driver each); completions may add up to
        k_left of the remaining patterns, relaxed to fractional drivers with
        an aggregate activation row sum(x_j / cap_j) <= k_left. Returns
        (objective, x, j_lo, reduced_costs, max_frac, n_pos_rem); x lays out
        the chosen columns first and then columns j_lo .. u.n-1, so callers
        index by position."""
        j_lo = next_index if k_left > 0 else u.n
        if not chosen_idx and j_lo == u.n:
            return None if r1 > r0 else (0.0, np.zeros(0), u.n, None, 0.0, 0)
        if _HAVE_NUMBA:
            code, x, obj, rc, max_frac, n_pos = _node_lp_core(
                u.cov, u.cost, u.cap, u.inv_cap, b_rows,
                np.asarray(chosen_idx, dtype=np.int64),
                j_lo, u.n, float(k_left), r0, r1, u.end_row, 20000,
            )
            if code != 0:
                return None
            return float(obj), x, j_lo, rc, max_frac, n_pos
        rem = list(range(j_lo, u.n))
        nch = len(chosen_idx)
        cols = chosen_idx + rem
        a_cov = u.cov[r0:r1, cols]
        lo = np.zeros(len(cols))
        lo[:nch] = 1.0
        hi = u.cap[cols]
        if rem:
            card = np.zeros(len(cols))
            card[nch:] = u.inv_cap[rem]
            a_ub = np.vstack([-a_cov, card[None, :]])
            b_ub = np.concatenate([-b_rows[r0:r1], [float(k_left)]])
        else:
            a_ub = -a_cov
            b_ub = -b_rows[r0:r1]
        result = solve_lp_unchecked(u.cost[cols], a_ub, b_ub, lo, hi)
        if result.status is not LpStatus.OPTIMAL:
            return None
        x = result.x
        x_int = np.rint(x)
        max_frac = float(np.max(np.abs(x - x_int))) if len(x) else 0.0
        n_pos = int(np.count_nonzero(x_int[nch:] > 0.5))
        return result.objective, x, j_lo, None, max_frac, n_pos

    def lp_left_value(u: _Universe, u_key: int, chosen_idx: list[int],
                      next_index: int, k_l: int, r0: int, r_gb: int, gb: int):
        """Least cost attributable to slots before gb: every span is charged
        only for its hours before gb, and the activation row counts only
        shifts confined there (straddlers are charged on the far side)."""
        key = (u_key, gb)
        clipped = clip_costs.get(key)
        if clipped is None:
            ccost = np.minimum(u.ends, gb) - np.array(u.starts, dtype=float)
            # straddlers are exempt from the confined activation row
            conf_inv = np.where(u.ends <= gb, u.inv_cap, 0.0)
            jg = bisect.bisect_left(u.starts, gb)
            clipped = (ccost, conf_inv, jg)
            clip_costs[key] = clipped
        ccost, conf_inv, jg = clipped
        j_lo = min(next_index, jg)
        if not chosen_idx and j_lo == jg:
            return 0.0 if r_gb == r0 else None
        if r_gb == r0:
            return float(ccost[chosen_idx].sum()) if chosen_idx else 0.0
        if _HAVE_NUMBA:
            code, _x, obj, _rc, _f, _np_ = _node_lp_core(
                u.cov, ccost, u.cap, conf_inv, b_rows,
                np.asarray(chosen_idx, dtype=np.int64),
                j_lo, jg, float(k_l), r0, r_gb, u.end_row, 20000,
            )
            return float(obj) if code == 0 else None
        rem = list(range(j_lo, jg))
        cols = chosen_idx + rem
        a_cov = u.cov[r0:r_gb, cols]
        lo = np.zeros(len(cols))
        lo[: len(chosen_idx)] = 1.0
        hi = u.cap[cols]
        if rem:
            card = np.zeros(len(cols))
            card[len(chosen_idx):] = conf_inv[rem]
            a_ub = np.vstack([-a_cov, card[None, :]])
            b_ub = np.concatenate([-b_rows[r0:r_gb], [float(k_l)]])
        else:
            a_ub = -a_cov
            b_ub = -b_rows[r0:r_gb]
        result = solve_lp_unchecked(ccost[cols], a_ub, b_ub, lo, hi)
        if result.status is not LpStatus.OPTIMAL:
            return None
        return result.objective

    # region_solve(g, k, exact=True): least driver-hours covering deficits at
    # or past slot g using at most k shifts starting at or past g, or None.
    # With exact=False the pool gains the clipped stand-ins, so the value is
    # a lower bound on what any completion must pay past g, including shifts
    # that straddle g; assignments are not tracked there.
    region_cache: dict[tuple[int, int], tuple[int, dict[int, int]] | None] = {}
    bound_cache: dict[tuple[int, int], tuple[int, dict[int, int]] | None] = {}
    tail_lp_cache: dict[tuple[int, int], int | None] = {}

    def tail_root_lb(g: int, k: int) -> int | None:
        """Root relaxation of the bound pool past g: a cheap stand-in for the
        exact tail value in the first pruning pass."""
        key = (g, k)
        if key in tail_lp_cache:
            return tail_lp_cache[key]
        rg = bisect.bisect_left(deficit, g)
        if rg == n_rows:
            val: int | None = 0
        else:
            ub = bound_universe(g)
            need = _cover_need(ub, 0, deficit, rg)
            if need is None or need > k:
                val = None
            else:
                out = node_lp(ub, [], 0, k, rg, n_rows)
                val = None if out is None else int(math.ceil(out[0] - 1e-7))
        tail_lp_cache[key] = val
        return val

    def region_solve(g: int, budget: int, exact: bool = True):
        cache = region_cache if exact else bound_cache
        key = (g, budget)
        if key in cache:
            return cache[key]
        r0 = bisect.bisect_left(deficit, g)
        if r0 == n_rows:
            cache[key] = (0, {})
            return cache[key]
        u = u_full if exact else bound_universe(g)
        u_key = -1 if exact else g
        j0 = bisect.bisect_left(u.starts, g)
        count = _cover_need(u, j0, deficit, r0)
        if count is None or count > budget:
            cache[key] = None
            return None

        best_obj = math.inf
        best_assign: dict[int, int] = {}
        dead: set[int] = set()
        heuristic = _partition_heuristic(
            b, u.cands[j0:], budget, horizon, t_start=deficit[r0]
        )
        if heuristic is not None:
            best_obj = heuristic[0]
            if exact:
                best_assign = {
                    c.pattern.index: h for c, h in heuristic[1].values()
                }

        def try_incumbent(lp_obj: float, x: np.ndarray, chosen_idx: list[int],
                          j_lo: int, k_left: int, max_frac: float, n_pos: int):
            nonlocal best_obj, best_assign
            if max_frac > 1e-6 or n_pos > k_left:
                return
            obj = int(round(lp_obj))
            if obj < best_obj:
                best_obj = obj
                if exact:
                    cols = chosen_idx + list(range(j_lo, u.n))
                    best_assign = {
                        u.cands[ci].pattern.index: int(round(v))
                        for ci, v in zip(cols, x)
                        if v > 0.5
                    }

        def exact_assignment(chosen_idx: list[int], r1: int):
            """Optimal integral drivers for a fixed activation set over
            deficit rows [r0, r1); the interval structure keeps the LP
            vertex integral."""
            outcome = node_lp(u, chosen_idx, u.n, 0, r0, r1)
            if outcome is None:
                return None
            lp_obj, x = outcome[0], outcome[1]
            if outcome[4] > 1e-6:
                raise AssertionError("interval LP returned a fractional vertex")
            x_int = np.rint(x)
            obj = int(round(lp_obj))
            if not exact:
                return obj, {}
            assign = {
                u.cands[ci].pattern.index: int(v)
                for ci, v in zip(chosen_idx, x_int)
                if v > 0
            }
            return obj, assign

        def split_bound(chosen_idx: list[int], next_index: int, k_left: int,
                        gb: int, r_gb: int):
            """Lower bound over every completion, split at the boundary: the
            clipped cost of the left side plus a bound on the tail, minimized
            over ways to divide the activation budget. One left relaxation at
            full budget bounds every split; the per-split left and the exact
            stand-in tails are priced only when that coarse pass fails."""
            lefts: dict[int, float] = {}
            best = None
            for k_l in range(k_left + 1):
                t_lb = tail_root_lb(gb, k_left - k_l)
                if t_lb is None:
                    break  # shrinking the tail budget cannot restore it
                left = lp_left_value(
                    u, u_key, chosen_idx, next_index, k_l, r0, r_gb, gb
                )
                if left is None:
                    continue
                lefts[k_l] = left
                total = int(math.ceil(left - 1e-7)) + t_lb
                if best is None or total < best:
                    best = total
            if best is None or best >= best_obj:
                return best
            best = None
            for k_l in range(k_left + 1):
                left = lefts.get(k_l)
                if left is None:
                    continue  # this division has no feasible left side
                tail = region_solve(gb, k_left - k_l, exact=False)
                if tail is None:
                    break
                total = int(math.ceil(left - 1e-7)) + tail[0]
                if best is None or total < best:
                    best = total
            return best

        def visit(chosen_idx: list[int], next_index: int, k_left: int,
                  ri: int, bound=None):
            # every chosen span starts at or before the first uncovered slot
            # and is contiguous, so the covered deficit rows are always the
            # prefix [r0, ri); ri is the whole coverage state
            nonlocal best_obj, best_assign
            if ri < n_rows:
                # exact minimum number of interval shifts still needed; far
                # cheaper than the relaxation when the budget already fails
                need = _cover_need(u, next_index, deficit, ri)
                if need is None or need > k_left:
                    return
            if bound is None:
                bound = node_lp(u, chosen_idx, next_index, k_left, r0, n_rows)
            if bound is None:
                return
            lp_obj, x, j_lo, rcv, max_frac, n_pos = bound
            if lp_obj >= best_obj - 1 + 1e-7:
                return
            try_incumbent(lp_obj, x, chosen_idx, j_lo, k_left, max_frac, n_pos)
            if lp_obj >= best_obj - 1 + 1e-7:
                return
            # the next deficit row past everything covered so far: no chosen
            # span can reach it (it would have covered it), so shifts starting
            # there form a suffix subproblem, and what straddlers owe the far
            # side is priced by the stand-ins of its bound pool
            rb = ri if ri > r0 else r0 + 1
            gb = deficit[rb] if rb < n_rows else None
            if gb is not None and _SPLIT_PRUNE:
                sb = split_bound(chosen_idx, next_index, k_left, gb, rb)
                if sb is None or sb >= best_obj:
                    return
            if gb is not None and ri > r0:
                # completions that add no further shift before the boundary
                left = exact_assignment(chosen_idx, rb)
                tail = region_solve(gb, k_left, exact)
                if left is not None and tail is not None:
                    total = left[0] + tail[0]
                    if total < best_obj:
                        best_obj = total
                        best_assign = {**left[1], **tail[1]}
            elif gb is None and ri >= n_rows and chosen_idx and k_left > 0:
                # the stop-here completion: these shifts alone, no additions
                stop = exact_assignment(chosen_idx, n_rows)
                if stop is not None and stop[0] < best_obj:
                    best_obj, best_assign = stop
            if k_left == 0:
                return
            # expansion: next pattern in lexicographic order; it must not
            # strand an uncovered deficit slot behind its start, and shifts
            # at or past the boundary belong to the suffix subproblem
            start_limit = deficit[ri] if ri < n_rows else deficit[-1]
            if gb is not None:
                start_limit = min(start_limit, gb - 1)
            base = len(chosen_idx) - j_lo
            ncols = len(chosen_idx) + (u.n - j_lo)
            mu = 0.0
            if rcv is not None and len(rcv) > ncols + (n_rows - r0):
                # dual of the activation row: what one unit of budget is worth
                mu = max(0.0, float(rcv[ncols + (n_rows - r0)]))
            children = []
            for idx in range(next_index, u.n):
                if u.starts[idx] > start_limit:
                    break
                if u.dup[idx] and idx > next_index:
                    continue  # identical copy; its twin was just skippable
                if idx in dead:
                    continue
                # a child forces a driver onto this shift and spends one unit
                # of activation budget; the parent vertex prices both moves,
                # linear in the forced level, so the extremes bound the child
                xi = x[base + idx]
                est = lp_obj
                if rcv is not None:
                    r = float(rcv[base + idx])
                    gain = min(
                        r * (1.0 - xi) + mu * (1.0 - u.inv_cap[idx]),
                        r * (u.cap[idx] - xi),
                    )
                    if gain > 0.0:
                        est += gain
                children.append((-xi, est, idx))
            # subtrees the relaxation leans on first: an early strong
            # incumbent lets the bound cut the rest
            children.sort()
            for _, est, idx in children:
                if est >= best_obj - 1 + 1e-7:
                    continue  # the child relaxation cannot beat the incumbent
                visit(
                    chosen_idx + [idx],
                    idx + 1,
                    k_left - 1,
                    max(ri, int(u.end_row[idx])),
                )

        root = node_lp(u, [], j0, budget, r0, n_rows)
        if root is None:
            cache[key] = None
            return None
        # LP-guided incumbent: activate the shifts the root relaxation leans
        # on and price them exactly; overlapping staircases that the covering
        # heuristic cannot see usually land within a hair of the optimum
        rx = root[1]
        order = sorted(range(len(rx)), key=lambda i: -rx[i])
        support = []
        for i in order:
            if rx[i] <= 1e-9 or len(support) >= budget:
                break
            support.append(j0 + i)
        if support:
            support.sort()
            seeded = exact_assignment(support, n_rows)
            if seeded is not None and seeded[0] < best_obj:
                best_obj, best_assign = seeded

        # dive: walk left to right, committing at each step the earliest
        # shift the relaxation puts weight on, and price any vertex whose
        # loose support already fits the remaining budget
        forced: list[int] = []
        k, bound = budget, root
        while k > 0 and bound is not None:
            x, j_lo_d = bound[1], bound[2]
            n_ch = len(forced)
            total = n_ch + (u.n - j_lo_d)
            pos = [i for i in range(n_ch, total) if x[i] > 1e-6]
            if not pos:
                break
            s0 = min(u.starts[j_lo_d + i - n_ch] for i in pos)
            i_star = max(
                (i for i in pos if u.starts[j_lo_d + i - n_ch] == s0),
                key=lambda i: x[i],
            )
            forced.append(j_lo_d + i_star - n_ch)
            k -= 1
            bound = node_lp(u, forced, forced[-1] + 1, k, r0, n_rows)
            if bound is None:
                break
            nf = len(forced)
            jn = bound[2]
            loose = [
                jn + (i - nf)
                for i in range(nf, nf + (u.n - jn))
                if bound[1][i] > 1e-9
            ]
            if len(loose) <= k:
                settled = exact_assignment(sorted(forced + loose), n_rows)
                if settled is not None and settled[0] < best_obj:
                    best_obj, best_assign = settled

        # reduced-cost fixing: force each shift active in turn and price the
        # relaxation; shifts that already cost as much as the incumbent can
        # never take part in an improvement, so expansion skips them
        if math.isfinite(best_obj):
            threshold = best_obj
            keep = set(support)
            for j in range(j0, u.n):
                if j in keep:
                    continue
                if u.dup[j] and j - 1 in dead:
                    dead.add(j)  # identical twin, same verdict
                    continue
                probe = node_lp(u, [j], j0, budget - 1, r0, n_rows)
                if probe is None or math.ceil(probe[0] - 1e-7) >= threshold:
                    dead.add(j)

        visit([], j0, budget, r0, bound=root)
        cache[key] = None if math.isinf(best_obj) else (int(best_obj), best_assign)
        return cache[key]

    outcome = region_solve(0, n_cap)
    if outcome is None:
        raise InfeasibleScheduleError(
            deficit[0],
            f"infeasible: no activation of at most {n_cap} shifts covers the "
            f"buffer (first unmet slot {deficit[0]})",
        )
    best_obj, best_assign = outcome
    drivers = np.zeros(len(problem.patterns), dtype=int)
    for index, x in best_assign.items():
        drivers[index] = x
    return _finish(problem, drivers, int(best_obj))


def _solve_generic(problem: ScheduleProblem) -> ScheduleSolution:
    """Branch and bound on raw activation variables. Handles wrapped
    coverage, where the lexicographic frontier argument does not apply."""
    b = np.array(problem.buffer.values, dtype=float)
    n = len(problem.patterns)
    m_cap = float(problem.max_drivers_per_shift)
    n_cap = problem.max_active_shifts
    a = problem.coverage_matrix()
    lengths = np.array([p.length for p in problem.patterns], dtype=float)
    best: dict = {"objective": math.inf, "x": None}

    def relax(fixed1: frozenset, fixed0: frozenset):
        free = [j for j in range(n) if j not in fixed1 and j not in fixed0]
        cols = sorted(fixed1) + free
        if not cols:
            return None
        sub_a = a[:, cols]
        rows = [-sub_a]
        rhs = [-b]
        if free:
            card = np.zeros(len(cols))
            card[len(fixed1):] = 1.0
            rows.append(card[None, :])
            rhs.append(np.array([m_cap * (n_cap - len(fixed1))]))
        result = solve_lp(
            c=lengths[cols],
            a_ub=np.vstack(rows),
            b_ub=np.concatenate(rhs),
            lower=np.zeros(len(cols)),
            upper=np.full(len(cols), m_cap),
        )
        if result.status is not LpStatus.OPTIMAL:
            return None
        x_full = np.zeros(n)
        x_full[cols] = result.x
        return result.objective, x_full

    def visit(fixed1: frozenset, fixed0: frozenset):
        if len(fixed1) == n_cap:
            fixed0 = frozenset(range(n)) - fixed1
        outcome = relax(fixed1, fixed0)
        if outcome is None:
            return
        obj, x = outcome
        if obj >= best["objective"] - 1 + 1e-7:
            return
        free_support = [
            j for j in range(n) if j not in fixed1 and j not in fixed0 and x[j] > 1e-7
        ]
        if not free_support:
            rounded = np.round(x)
            if np.max(np.abs(x - rounded)) <= 1e-6:
                obj_int = int(round(float(lengths @ rounded)))
                if obj_int < best["objective"]:
                    best["objective"] = obj_int
                    best["x"] = rounded.astype(int)
            return
        j = max(free_support, key=lambda k: (x[k], -k))
        visit(fixed1 | {j}, fixed0)
        visit(fixed1, fixed0 | {j})

    visit(frozenset(), frozenset())
    if best["x"] is None:
        first = int(np.flatnonzero(b > 0)[0])
        raise InfeasibleScheduleError(
            first,
            f"infeasible: no activation of at most {n_cap} shifts covers the "
            f"buffer (first unmet slot {first})",
        )
    return _finish(problem, best["x"], best["objective"])


@dataclass(frozen=True)
class ScheduleComparison:
    feasible: bool
    uncovered_slots: tuple[int, ...]
    driver_hour_difference: int | None  # manual minus optimal
    slack_difference: tuple[int, ...] | None  # per slot, manual minus optimal


def compare_schedules(
    problem: ScheduleProblem, manual: ScheduleSolution, optimal: ScheduleSolution
) -> ScheduleComparison:
    """How much a hand-built schedule overspends relative to the solver.

    An infeasible manual schedule yields a report naming its uncovered slots
    instead of a comparison.
    """
    b = problem.buffer.values
    uncovered = tuple(t for t in range(len(b)) if manual.coverage[t] < b[t])
    if uncovered:
        return ScheduleComparison(False, uncovered, None, None)
    slack = tuple(
        (manual.coverage[t] - b[t]) - (optimal.coverage[t] - b[t])
        for t in range(len(b))
    )
    return ScheduleComparison(
        feasible=True,
        uncovered_slots=(),
        driver_hour_difference=manual.objective - optimal.objective,
        slack_difference=slack,
    )


def schedule_to_dict(
    problem: ScheduleProblem, solution: ScheduleSolution
) -> dict:
    return {
        "buffer": list(problem.buffer.values),
        "M": problem.max_drivers_per_shift,
        "N": problem.max_active_shifts,
        "activations": [
            {"start_slot": p.start, "length": p.length, "drivers": x}
            for p, x in solution.activations(problem.patterns)
        ],
        "objective": solution.objective,
        "optimal": solution.optimal,
    }


def schedule_from_dict(payload: Mapping) -> tuple[ScheduleProblem, ScheduleSolution]:
    buffer = BufferProfile(tuple(int(v) for v in payload["buffer"]))
    problem = ScheduleProblem(
        buffer=buffer,
        max_drivers_per_shift=int(payload["M"]),
        max_active_shifts=int(payload["N"]),
    )
    drivers = [0] * len(problem.patterns)
    by_key = {(p.start, p.length): p.index for p in problem.patterns}
    for act in payload["activations"]:
        key = (int(act["start_slot"]), int(act["length"]))
        if key not in by_key:
            raise ValueError(f"unknown shift pattern {key}")
        drivers[by_key[key]] = int(act["drivers"])
    solution = evaluate_assignment(
        problem, drivers, optimal=bool(payload.get("optimal", False))
    )
    return problem, solution


def write_schedule(problem: ScheduleProblem, solution: ScheduleSolution, sink: IO[str]) -> None:
    json.dump(schedule_to_dict(problem, solution), sink, indent=2, sort_keys=True)
    sink.write("\n")


def read_schedule(source: IO[str]) -> tuple[ScheduleProblem, ScheduleSolution]:
    return schedule_from_dict(json.load(source))
