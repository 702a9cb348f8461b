import numpy as np
import pytest
from scipy.optimize import linprog

from fleetplan.boundedlp import LpStatus, solve_lp


def scipy_solve(c, a, b, lower, upper):
    bounds = [(lo, None if np.isinf(hi) else hi) for lo, hi in zip(lower, upper)]
    return linprog(c, A_ub=a, b_ub=b, bounds=bounds, method="highs")


class TestHandCases:
    def test_simple_minimum_at_bound(self):
        # min x0 + x1 s.t. x0 + x1 >= 3, 0 <= x <= 5
        result = solve_lp(
            c=[1.0, 1.0],
            a_ub=[[-1.0, -1.0]],
            b_ub=[-3.0],
            lower=[0.0, 0.0],
            upper=[5.0, 5.0],
        )
        assert result.status is LpStatus.OPTIMAL
        assert result.objective == pytest.approx(3.0, abs=1e-9)

    def test_upper_bounds_bind(self):
        # min -x0 - 2 x1 s.t. x0 + x1 <= 4, x <= (3, 3): best is (1, 3)
        result = solve_lp(
            c=[-1.0, -2.0],
            a_ub=[[1.0, 1.0]],
            b_ub=[4.0],
            lower=[0.0, 0.0],
            upper=[3.0, 3.0],
        )
        assert result.status is LpStatus.OPTIMAL
        assert result.objective == pytest.approx(-7.0, abs=1e-9)
        assert result.x == pytest.approx([1.0, 3.0], abs=1e-9)

    def test_infeasible_bounds_vs_rows(self):
        # x0 <= 1 bound but row demands x0 >= 2
        result = solve_lp(
            c=[1.0],
            a_ub=[[-1.0]],
            b_ub=[-2.0],
            lower=[0.0],
            upper=[1.0],
        )
        assert result.status is LpStatus.INFEASIBLE

    def test_crossed_bounds_infeasible(self):
        result = solve_lp(c=[1.0], a_ub=[[1.0]], b_ub=[10.0], lower=[2.0], upper=[1.0])
        assert result.status is LpStatus.INFEASIBLE

    def test_unbounded(self):
        # min -x0 with no upper bound and a slack-only row
        result = solve_lp(
            c=[-1.0],
            a_ub=[[0.0]],
            b_ub=[1.0],
            lower=[0.0],
            upper=[np.inf],
        )
        assert result.status is LpStatus.UNBOUNDED

    def test_nonzero_lower_bounds(self):
        # min x0 + x1 with x >= (2, 3) and a loose row
        result = solve_lp(
            c=[1.0, 1.0],
            a_ub=[[1.0, 1.0]],
            b_ub=[100.0],
            lower=[2.0, 3.0],
            upper=[10.0, 10.0],
        )
        assert result.status is LpStatus.OPTIMAL
        assert result.x == pytest.approx([2.0, 3.0], abs=1e-9)

    def test_fixed_variable(self):
        # lo == hi pins x1 = 2
        result = solve_lp(
            c=[1.0, 0.0],
            a_ub=[[-1.0, -1.0]],
            b_ub=[-5.0],
            lower=[0.0, 2.0],
            upper=[10.0, 2.0],
        )
        assert result.status is LpStatus.OPTIMAL
        assert result.x == pytest.approx([3.0, 2.0], abs=1e-9)

    def test_infinite_lower_bound_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            solve_lp([1.0], [[1.0]], [1.0], [-np.inf], [1.0])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimensions"):
            solve_lp([1.0, 2.0], [[1.0]], [1.0], [0.0], [1.0])


class TestCoveringShape:
    """Instances with the structure the scheduler produces."""

    def test_interval_covering_is_integral(self):
        # min 3x0 + 4x1 + 3x2, coverage rows over intervals, integer data:
        # the optimum must land on an integer vertex.
        patterns = [(0, 3), (2, 4), (5, 3)]  # (start, length) over 8 slots
        b = np.array([2, 2, 2, 5, 5, 5, 1, 1], dtype=float)
        a = np.zeros((8, 3))
        for j, (s, l) in enumerate(patterns):
            a[s : s + l, j] = 1.0
        result = solve_lp(
            c=[float(l) for _, l in patterns],
            a_ub=-a,
            b_ub=-b,
            lower=np.zeros(3),
            upper=np.full(3, 10.0),
        )
        assert result.status is LpStatus.OPTIMAL
        assert np.allclose(result.x, np.round(result.x), atol=1e-7)
        cover = a @ result.x
        assert np.all(cover >= b - 1e-9)

    def test_matches_scipy_on_covering(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            n = 6
            slots = 8
            a = np.zeros((slots, n))
            lengths = []
            for j in range(n):
                s = rng.integers(0, slots - 2)
                l = rng.integers(2, min(5, slots - s) + 1)
                a[s : s + l, j] = 1.0
                lengths.append(float(l))
            b = rng.integers(0, 8, size=slots).astype(float)
            lower = np.zeros(n)
            upper = np.full(n, float(rng.integers(3, 12)))
            mine = solve_lp(lengths, -a, -b, lower, upper)
            ref = scipy_solve(lengths, -a, -b, lower, upper)
            if ref.status == 2:
                assert mine.status is LpStatus.INFEASIBLE
            else:
                assert mine.status is LpStatus.OPTIMAL
                assert mine.objective == pytest.approx(ref.fun, abs=1e-7)


class TestRandomizedAgainstScipy:
    def test_random_dense_lps(self):
        rng = np.random.default_rng(17)
        agree = 0
        for _ in range(200):
            m = int(rng.integers(1, 7))
            n = int(rng.integers(1, 9))
            a = rng.normal(size=(m, n)).round(2)
            b = rng.normal(scale=3.0, size=m).round(2)
            c = rng.normal(size=n).round(2)
            lower = rng.uniform(-2.0, 0.0, size=n).round(2)
            width = rng.uniform(0.5, 4.0, size=n).round(2)
            upper = lower + width
            mine = solve_lp(c, a, b, lower, upper)
            ref = scipy_solve(c, a, b, lower, upper)
            if ref.status == 2:
                assert mine.status is LpStatus.INFEASIBLE, (a, b, lower, upper)
            else:
                assert ref.status == 0
                assert mine.status is LpStatus.OPTIMAL, (a, b, lower, upper)
                assert mine.objective == pytest.approx(ref.fun, abs=1e-6)
                # the reported point must actually be feasible
                assert np.all(a @ mine.x <= b + 1e-7)
                assert np.all(mine.x >= lower - 1e-9)
                assert np.all(mine.x <= upper + 1e-9)
            agree += 1
        assert agree == 200

    def test_degenerate_rows(self):
        # duplicated rows and zero rows must not break the pivoting
        a = np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
        b = np.array([2.0, 2.0, 0.0])
        result = solve_lp([-1.0, -1.0], a, b, [0.0, 0.0], [5.0, 5.0])
        assert result.status is LpStatus.OPTIMAL
        assert result.objective == pytest.approx(-2.0, abs=1e-9)
