"""Bounded-variable linear programming by the two-phase simplex method.

Minimizes c.x subject to A x <= b and lower <= x <= upper. Variable bounds
are handled natively (nonbasic variables rest at either bound) instead of
being expanded into rows. Pricing is Dantzig's rule, falling back to Bland's
rule permanently once a run of degenerate pivots suggests cycling. Meant for
the small, well-conditioned relaxations the shift scheduler produces, where
pulling in an external solver would be overkill. A numba kernel carries the
pivot loop when the package is available; otherwise a vectorized numpy
implementation of the same algorithm takes over.

Callers that know a feasible starting point can pass ``at_upper_init``
flagging the columns to start at their upper bound; when the implied
all-slack basis is feasible the solve skips phase one entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - optional accelerator only
    _HAVE_NUMBA = False

    def _njit(**_kwargs):
        def wrap(fn):
            return fn

        return wrap


_TOL = 1e-9
# consecutive zero-length steps before pricing drops to Bland's rule
_STALL_LIMIT = 40

_NO_INIT = np.zeros(0, dtype=np.uint8)


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


_STATUS_BY_CODE = (
    LpStatus.OPTIMAL,
    LpStatus.INFEASIBLE,
    LpStatus.UNBOUNDED,
    LpStatus.ITERATION_LIMIT,
)


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    x: np.ndarray | None
    objective: float | None


def solve_lp(
    c,
    a_ub,
    b_ub,
    lower,
    upper,
    max_iterations: int = 20000,
    at_upper_init=None,
) -> LpResult:
    """Minimize ``c @ x`` subject to ``a_ub @ x <= b_ub``, ``lower <= x <= upper``.

    Lower bounds must be finite (the initial point sits on them); upper
    bounds may be +inf. ``at_upper_init`` optionally flags columns to start
    at their upper bound; it is a hint only and never changes the answer.
    """
    c = np.asarray(c, dtype=float)
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(a_ub, dtype=float)))
    b = np.asarray(b_ub, dtype=float)
    lo_x = np.asarray(lower, dtype=float)
    hi_x = np.asarray(upper, dtype=float)
    m, n = a.shape
    if c.shape != (n,) or b.shape != (m,) or lo_x.shape != (n,) or hi_x.shape != (n,):
        raise ValueError("inconsistent problem dimensions")
    if not np.all(np.isfinite(lo_x)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi_x < lo_x):
        return LpResult(LpStatus.INFEASIBLE, None, None)
    init = _NO_INIT if at_upper_init is None else np.asarray(at_upper_init, dtype=np.uint8)

    if _HAVE_NUMBA:
        code, x, objective, _rc = _solve_core(c, a, b, lo_x, hi_x, max_iterations, init)
        status = _STATUS_BY_CODE[code]
        if status is not LpStatus.OPTIMAL:
            return LpResult(status, None, None)
        return LpResult(status, x, float(objective))
    return _solve_vectorized(c, a, b, lo_x, hi_x, max_iterations, init)


def solve_lp_unchecked(
    c: np.ndarray,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_iterations: int = 20000,
    at_upper_init: np.ndarray | None = None,
) -> LpResult:
    """``solve_lp`` minus input validation, for callers in a hot loop that
    already guarantee well-formed contiguous float arrays with finite lower
    bounds and upper >= lower."""
    init = _NO_INIT if at_upper_init is None else at_upper_init
    if _HAVE_NUMBA:
        code, x, objective, _rc = _solve_core(c, a_ub, b_ub, lower, upper, max_iterations, init)
        status = _STATUS_BY_CODE[code]
        if status is not LpStatus.OPTIMAL:
            return LpResult(status, None, None)
        return LpResult(status, x, float(objective))
    return _solve_vectorized(c, a_ub, b_ub, lower, upper, max_iterations, init)


@_njit(cache=True)
def _pivot_loop(tableau, basis, xb, lo, hi, at_upper, is_basic, cost, max_iterations):
    m, total = tableau.shape
    cb = np.empty(m)
    y = np.empty(total)
    bland = False
    stall = 0
    for _ in range(max_iterations):
        for i in range(m):
            cb[i] = cost[basis[i]]
        for j in range(total):
            y[j] = 0.0
        for i in range(m):
            w = cb[i]
            if w != 0.0:
                for j in range(total):
                    y[j] += w * tableau[i, j]

        enter = -1
        if bland:
            for j in range(total):
                if is_basic[j] or hi[j] - lo[j] <= _TOL:
                    continue
                r = cost[j] - y[j]
                if at_upper[j]:
                    if r > _TOL:
                        enter = j
                        break
                elif r < -_TOL:
                    enter = j
                    break
        else:
            best_score = _TOL
            for j in range(total):
                if is_basic[j] or hi[j] - lo[j] <= _TOL:
                    continue
                r = cost[j] - y[j]
                score = r if at_upper[j] else -r
                if score > best_score:
                    best_score = score
                    enter = j
        if enter == -1:
            return 0

        direction = -1.0 if at_upper[enter] else 1.0
        flip_limit = hi[enter] - lo[enter]
        row_min = np.inf
        for i in range(m):
            g = direction * tableau[i, enter]
            if g > _TOL:
                lim = (xb[i] - lo[basis[i]]) / g
            elif g < -_TOL:
                lim = (xb[i] - hi[basis[i]]) / g
            else:
                continue
            if lim < 0.0:
                lim = 0.0
            if lim < row_min:
                row_min = lim
        step = flip_limit if flip_limit < row_min else row_min
        if not np.isfinite(step):
            return 2
        if not bland:
            if step <= _TOL:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True  # degenerate run: Dantzig may cycle
            else:
                stall = 0

        if flip_limit < row_min - _TOL:
            for i in range(m):
                xb[i] -= direction * flip_limit * tableau[i, enter]
            at_upper[enter] = not at_upper[enter]
            continue

        # Bland again for the leaving variable: among the binding rows,
        # the one whose basic variable has the lowest index.
        leave_row = -1
        leave_var = total + 1
        for i in range(m):
            g = direction * tableau[i, enter]
            if g > _TOL:
                lim = (xb[i] - lo[basis[i]]) / g
            elif g < -_TOL:
                lim = (xb[i] - hi[basis[i]]) / g
            else:
                continue
            if lim < 0.0:
                lim = 0.0
            if lim <= row_min + _TOL and basis[i] < leave_var:
                leave_var = basis[i]
                leave_row = i
        leaving = basis[leave_row]
        g_leave = direction * tableau[leave_row, enter]

        for i in range(m):
            xb[i] -= direction * step * tableau[i, enter]
        entering_value = (hi[enter] if at_upper[enter] else lo[enter]) + direction * step
        at_upper[leaving] = g_leave < 0.0  # hit its upper bound, else lower

        inv = 1.0 / tableau[leave_row, enter]
        for j in range(total):
            tableau[leave_row, j] *= inv
        for i in range(m):
            if i == leave_row:
                continue
            f = tableau[i, enter]
            if f != 0.0:
                for j in range(total):
                    tableau[i, j] -= f * tableau[leave_row, j]
        is_basic[leaving] = False
        is_basic[enter] = True
        basis[leave_row] = enter
        xb[leave_row] = entering_value
    return 3


@_njit(cache=True)
def _finish_core(tableau, basis, xb, lo, hi, at_upper, is_basic, cost,
                 c, lo_x, hi_x, n, m, max_iterations):
    """Run phase two from the prepared basis and extract the solution."""
    status = _pivot_loop(
        tableau, basis, xb, lo, hi, at_upper, is_basic, cost, max_iterations
    )
    if status != 0:
        return status, np.zeros(0), 0.0, np.zeros(0)

    x = np.empty(n)
    for j in range(n):
        x[j] = hi_x[j] if at_upper[j] else lo_x[j]
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = xb[i]
    objective = 0.0
    for j in range(n):
        objective += c[j] * x[j]
    # reduced costs at the final basis for decision and slack columns; a
    # slack's reduced cost is the negated row dual, so callers can price both
    # forcing a column off its bound and tightening a row
    rc = np.empty(n + m)
    for j in range(n + m):
        rc[j] = cost[j]
    for i in range(m):
        w = cost[basis[i]]
        if w != 0.0:
            for j in range(n + m):
                rc[j] -= w * tableau[i, j]
    return 0, x, objective, rc


@_njit(cache=True)
def _solve_core(c, a, b, lo_x, hi_x, max_iterations, at_upper_init):
    m, n = a.shape

    if at_upper_init.shape[0] == n:
        # caller-supplied starting corner: flagged columns at their (finite)
        # upper bound; if every row then holds with slack the all-slack basis
        # is feasible and phase one is unnecessary
        usable = True
        for j in range(n):
            if at_upper_init[j] != 0 and not np.isfinite(hi_x[j]):
                usable = False
                break
        if usable:
            resid0 = np.empty(m)
            for i in range(m):
                s = 0.0
                for j in range(n):
                    xv = hi_x[j] if at_upper_init[j] != 0 else lo_x[j]
                    s += a[i, j] * xv
                resid0[i] = b[i] - s
                if resid0[i] < -_TOL:
                    usable = False
                    break
        if usable:
            total = n + m
            tableau = np.zeros((m, total))
            lo = np.zeros(total)
            hi = np.empty(total)
            for j in range(n):
                lo[j] = lo_x[j]
                hi[j] = hi_x[j]
            for j in range(n, total):
                hi[j] = np.inf
            basis = np.empty(m, np.int64)
            xb = np.empty(m)
            for i in range(m):
                for j in range(n):
                    tableau[i, j] = a[i, j]
                tableau[i, n + i] = 1.0
                basis[i] = n + i
                xb[i] = resid0[i]
            at_upper = np.zeros(total, np.bool_)
            is_basic = np.zeros(total, np.bool_)
            for j in range(n):
                at_upper[j] = at_upper_init[j] != 0
            for i in range(m):
                is_basic[basis[i]] = True
            cost = np.zeros(total)
            for j in range(n):
                cost[j] = c[j]
            return _finish_core(
                tableau, basis, xb, lo, hi, at_upper, is_basic, cost,
                c, lo_x, hi_x, n, m, max_iterations,
            )

    resid = np.empty(m)
    n_art = 0
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += a[i, j] * lo_x[j]
        resid[i] = b[i] - s
        if resid[i] < -_TOL:
            n_art += 1
    total = n + m + n_art

    # Slack per row; artificial per row whose slack would start negative.
    tableau = np.zeros((m, total))
    lo = np.zeros(total)
    hi = np.empty(total)
    for j in range(n):
        lo[j] = lo_x[j]
        hi[j] = hi_x[j]
    for j in range(n, total):
        hi[j] = np.inf
    basis = np.empty(m, np.int64)
    xb = np.empty(m)
    k = 0
    for i in range(m):
        for j in range(n):
            tableau[i, j] = a[i, j]
        tableau[i, n + i] = 1.0
        if resid[i] < -_TOL:
            tableau[i, n + m + k] = -1.0
            for j in range(total):
                tableau[i, j] = -tableau[i, j]  # flip so the artificial is +1
            basis[i] = n + m + k
            xb[i] = -resid[i]
            k += 1
        else:
            basis[i] = n + i
            xb[i] = resid[i]
    at_upper = np.zeros(total, np.bool_)
    is_basic = np.zeros(total, np.bool_)
    for i in range(m):
        is_basic[basis[i]] = True

    cost = np.zeros(total)
    if n_art > 0:
        for j in range(n + m, total):
            cost[j] = 1.0
        status = _pivot_loop(
            tableau, basis, xb, lo, hi, at_upper, is_basic, cost, max_iterations
        )
        if status != 0:
            return status, np.zeros(0), 0.0, np.zeros(0)
        art_sum = 0.0
        for i in range(m):
            if basis[i] >= n + m:
                art_sum += xb[i]
        if art_sum > 1e-7:
            return 1, np.zeros(0), 0.0, np.zeros(0)
        for j in range(n + m, total):
            hi[j] = 0.0  # pin artificials at zero for phase 2
            cost[j] = 0.0
    for j in range(n):
        cost[j] = c[j]
    return _finish_core(
        tableau, basis, xb, lo, hi, at_upper, is_basic, cost,
        c, lo_x, hi_x, n, m, max_iterations,
    )


def _solve_vectorized(c, a, b, lo_x, hi_x, max_iterations: int, at_upper_init) -> LpResult:
    m, n = a.shape

    if at_upper_init.shape[0] == n:
        flags = at_upper_init.astype(bool) & np.isfinite(hi_x)
        if np.array_equal(flags, at_upper_init.astype(bool)):
            resid0 = b - a @ np.where(flags, hi_x, lo_x)
            if resid0.min(initial=np.inf) >= -_TOL:
                total = n + m
                tableau = np.zeros((m, total))
                tableau[:, :n] = a
                tableau[:, n:] = np.eye(m)
                lo = np.concatenate([lo_x, np.zeros(m)])
                hi = np.concatenate([hi_x, np.full(m, np.inf)])
                at_upper = np.zeros(total, dtype=bool)
                at_upper[:n] = flags
                state = _State(tableau, np.arange(n, n + m), resid0.copy(), lo, hi, at_upper)
                cost = np.zeros(total)
                cost[:n] = c
                status = _iterate(state, cost, max_iterations)
                if status is not LpStatus.OPTIMAL:
                    return LpResult(status, None, None)
                x = np.where(state.at_upper[:n], hi_x, lo_x).astype(float)
                for row, var in enumerate(state.basis):
                    if var < n:
                        x[var] = state.xb[row]
                return LpResult(LpStatus.OPTIMAL, x, float(c @ x))

    resid = b - a @ lo_x
    art_rows = np.flatnonzero(resid < -_TOL)
    n_art = len(art_rows)
    total = n + m + n_art

    tableau = np.zeros((m, total))
    tableau[:, :n] = a
    tableau[:, n : n + m] = np.eye(m)
    for k, i in enumerate(art_rows):
        tableau[i, n + m + k] = -1.0
        tableau[i] *= -1.0  # flip the row so the artificial column is +1

    lo = np.concatenate([lo_x, np.zeros(m), np.zeros(n_art)])
    hi = np.concatenate([hi_x, np.full(m, np.inf), np.full(n_art, np.inf)])

    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(n_art)
    xb = resid.copy()
    xb[art_rows] = -resid[art_rows]
    at_upper = np.zeros(total, dtype=bool)

    state = _State(tableau, basis, xb, lo, hi, at_upper)

    if n_art:
        phase1_cost = np.zeros(total)
        phase1_cost[n + m :] = 1.0
        status = _iterate(state, phase1_cost, max_iterations)
        if status is not LpStatus.OPTIMAL:
            return LpResult(status, None, None)
        if float(phase1_cost[state.basis] @ state.xb) > 1e-7:
            return LpResult(LpStatus.INFEASIBLE, None, None)
        state.hi[n + m :] = 0.0  # pin artificials at zero for phase 2

    cost = np.zeros(total)
    cost[:n] = c
    status = _iterate(state, cost, max_iterations)
    if status is not LpStatus.OPTIMAL:
        return LpResult(status, None, None)

    x = np.where(state.at_upper[:n], hi_x, lo_x).astype(float)
    for row, var in enumerate(state.basis):
        if var < n:
            x[var] = state.xb[row]
    return LpResult(LpStatus.OPTIMAL, x, float(c @ x))


class _State:
    __slots__ = ("tableau", "basis", "xb", "lo", "hi", "at_upper")

    def __init__(self, tableau, basis, xb, lo, hi, at_upper):
        self.tableau = tableau
        self.basis = basis
        self.xb = xb
        self.lo = lo
        self.hi = hi
        self.at_upper = at_upper


def _iterate(state: _State, cost: np.ndarray, max_iterations: int) -> LpStatus:
    tableau, basis = state.tableau, state.basis
    lo, hi, at_upper = state.lo, state.hi, state.at_upper
    m, total = tableau.shape
    bland = False
    stall = 0
    for _ in range(max_iterations):
        is_basic = np.zeros(total, dtype=bool)
        is_basic[basis] = True
        reduced = cost - cost[basis] @ tableau
        reduced[basis] = 0.0

        movable = ~is_basic & (hi - lo > _TOL)
        eligible = movable & (
            (~at_upper & (reduced < -_TOL)) | (at_upper & (reduced > _TOL))
        )
        candidates = np.flatnonzero(eligible)
        if candidates.size == 0:
            return LpStatus.OPTIMAL
        if bland:
            enter = int(candidates[0])  # lowest index
        else:
            scores = np.where(at_upper[candidates], reduced[candidates], -reduced[candidates])
            enter = int(candidates[int(np.argmax(scores))])  # Dantzig
        direction = -1.0 if at_upper[enter] else 1.0

        col = tableau[:, enter]
        g = direction * col
        limits = np.full(m, np.inf)
        inc = g > _TOL
        dec = g < -_TOL
        limits[inc] = (state.xb[inc] - lo[basis[inc]]) / g[inc]
        limits[dec] = (state.xb[dec] - hi[basis[dec]]) / g[dec]
        limits = np.maximum(limits, 0.0)
        flip_limit = hi[enter] - lo[enter]

        row_min = float(limits.min()) if m else np.inf
        step = min(flip_limit, row_min)
        if not np.isfinite(step):
            return LpStatus.UNBOUNDED
        if not bland:
            if step <= _TOL:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True  # degenerate run: Dantzig may cycle
            else:
                stall = 0

        if flip_limit < row_min - _TOL:
            state.xb -= direction * flip_limit * col
            at_upper[enter] = not at_upper[enter]
            continue

        # Bland again for the leaving variable: among the binding rows,
        # the one whose basic variable has the lowest index.
        binding = np.flatnonzero(limits <= row_min + _TOL)
        leave_row = int(binding[np.argmin(basis[binding])])
        leaving = basis[leave_row]

        state.xb -= direction * step * col
        entering_value = (hi[enter] if at_upper[enter] else lo[enter]) + direction * step
        at_upper[leaving] = g[leave_row] < 0  # hit its upper bound, else lower

        pivot = tableau[leave_row, enter]
        tableau[leave_row] /= pivot
        factors = tableau[:, enter].copy()
        factors[leave_row] = 0.0
        tableau -= np.outer(factors, tableau[leave_row])
        basis[leave_row] = enter
        state.xb[leave_row] = entering_value
    return LpStatus.ITERATION_LIMIT
