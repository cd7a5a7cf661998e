"""Bounded-variable simplex: hand cases, the enumeration oracle, statuses."""

import numpy as np
import pytest

from oracles import lp_enumeration_minimum
from silstruct.simplex import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    LinearProgram,
    LpSolution,
    UnboundedProblemError,
    dump_lp,
    solve_lp,
)


def random_feasible_lp(rng, n_max=8, m_max=4):
    """A bounded LP guaranteed feasible: b is padded above A @ x0."""
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    a = rng.normal(0.0, 1.0, size=(m, n)).round(3)
    lower = np.zeros(n)
    upper = rng.uniform(0.5, 2.0, size=n).round(3)
    x0 = rng.uniform(0, 1, size=n) * upper
    b = (a @ x0 + np.abs(rng.normal(0.0, 1.0, size=m))).round(3)
    c = rng.normal(0.0, 1.0, size=n).round(3)
    return LinearProgram(c, a, b, lower, upper)


class TestHandCases:
    def test_bounds_only_minimum(self):
        # no rows: minimize 2x - 3y over [0,1]^2 -> x=0, y=1
        lp = LinearProgram([2.0, -3.0], np.zeros((0, 2)), np.zeros(0), [0, 0], [1, 1])
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        assert sol.x == pytest.approx([0.0, 1.0])
        assert sol.objective == pytest.approx(-3.0)

    def test_single_constraint(self):
        # minimize -x - y st x + y <= 1, 0 <= x,y <= 1 -> objective -1
        lp = LinearProgram([-1.0, -1.0], [[1.0, 1.0]], [1.0], [0, 0], [1, 1])
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(-1.0)
        assert sol.x.sum() == pytest.approx(1.0)

    def test_binding_upper_bounds(self):
        # maximize x + 2y (minimize negative) st x + y <= 3, x <= 2, y <= 2
        lp = LinearProgram([-1.0, -2.0], [[1.0, 1.0]], [3.0], [0, 0], [2, 2])
        sol = solve_lp(lp)
        assert sol.objective == pytest.approx(-5.0)
        assert sol.x == pytest.approx([1.0, 2.0])

    def test_infeasible_detected(self):
        # x <= -1 with x >= 0
        lp = LinearProgram([1.0], [[1.0]], [-1.0], [0.0], [1.0])
        sol = solve_lp(lp)
        assert sol.status == INFEASIBLE
        assert np.isnan(sol.objective)

    def test_unbounded_raises(self):
        # minimize -x with x unbounded above and no rows
        lp = LinearProgram([-1.0], np.zeros((0, 1)), np.zeros(0), [0.0], [np.inf])
        with pytest.raises(UnboundedProblemError):
            solve_lp(lp)

    def test_negative_rhs_needs_phase1(self):
        # -x <= -0.5 (i.e. x >= 0.5): slack basis infeasible at x=0
        lp = LinearProgram([1.0], [[-1.0]], [-0.5], [0.0], [1.0])
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        assert sol.x == pytest.approx([0.5])

    def test_equality_sandwich(self):
        # x + y <= 1 and -(x + y) <= -1 pin x + y == 1
        lp = LinearProgram(
            [3.0, 1.0], [[1.0, 1.0], [-1.0, -1.0]], [1.0, -1.0], [0, 0], [1, 1]
        )
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(1.0)
        assert sol.x == pytest.approx([0.0, 1.0])

    def test_iteration_limit_status(self):
        lp = LinearProgram(
            [-1.0, -1.0, -1.0],
            [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]],
            [1.0, 1.0, 1.0],
            [0, 0, 0],
            [1, 1, 1],
        )
        sol = solve_lp(lp, max_iters=1)
        assert sol.status == ITERATION_LIMIT

    def test_fixed_variables(self):
        # lower == upper pins the variable
        lp = LinearProgram([1.0, 1.0], [[1.0, 1.0]], [5.0], [0.7, 0.0], [0.7, 1.0])
        sol = solve_lp(lp)
        assert sol.x[0] == pytest.approx(0.7)

    def test_alpha_slice_respects_n_primary(self):
        lp = LinearProgram(
            [1.0, 1.0, 1.0], np.zeros((0, 3)), np.zeros(0), [0, 0, 0], [1, 1, 1], n_primary=2
        )
        sol = solve_lp(lp)
        assert sol.alpha.shape == (2,)


class TestOracleAgreement:
    def test_random_lps_match_enumeration(self, rng):
        mismatches = []
        for i in range(100):
            lp = random_feasible_lp(rng)
            sol = solve_lp(lp)
            assert sol.status == OPTIMAL, f"instance {i} not optimal"
            oracle = lp_enumeration_minimum(lp.c, lp.a_ub, lp.b_ub, lp.lower, lp.upper)
            assert oracle is not None
            if abs(sol.objective - oracle) > 1e-6:
                mismatches.append((i, sol.objective, oracle))
        assert not mismatches, mismatches

    def test_solutions_always_feasible(self, rng):
        for _ in range(40):
            lp = random_feasible_lp(rng)
            sol = solve_lp(lp)
            assert (sol.x >= lp.lower - 1e-8).all()
            assert (sol.x <= lp.upper + 1e-8).all()
            if lp.a_ub.size:
                assert (lp.a_ub @ sol.x <= lp.b_ub + 1e-7).all()

    def test_objective_equals_c_dot_x(self, rng):
        for _ in range(20):
            lp = random_feasible_lp(rng)
            sol = solve_lp(lp)
            assert sol.objective == pytest.approx(float(lp.c @ sol.x), abs=1e-8)


class TestWarmStart:
    def test_valid_hint_skips_phase_one(self):
        # rows: x - e <= q, -x - e <= -q with q >= 0; hint pairs e with slack 0
        q = 0.8
        lp = LinearProgram(
            [0.1, 1.0],
            [[1.0, -1.0], [-1.0, -1.0]],
            [q, -q],
            [0.0, 0.0],
            [1.0, np.inf],
            n_primary=1,
            basis_hint=[1, 2],
        )
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        # optimum drives e to |q - x|; with lambda=0.1 < 1 selecting x=0.8 wins
        assert sol.x[0] == pytest.approx(0.8, abs=1e-8)

    def test_bad_hint_falls_back(self):
        lp = LinearProgram(
            [1.0, 1.0], [[1.0, 1.0]], [1.0], [0, 0], [1, 1], basis_hint=[0]
        )
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL


class TestDump:
    def test_dump_contains_rows_and_bounds(self):
        lp = LinearProgram([1.0, -2.0], [[1.0, 1.0]], [1.5], [0, 0], [1, np.inf])
        text = dump_lp(lp)
        assert text.startswith("LP 1")
        assert "MIN" in text and "ROW" in text and "BND" in text
        assert "inf" in text

    def test_dump_round_trips_floats_exactly(self):
        c = [0.1, -2.0000000000000004]
        lp = LinearProgram(c, [[1.0, 1.0]], [1.5], [0, 0], [1, 1])
        text = dump_lp(lp)
        assert repr(0.1) in text
        assert repr(-2.0000000000000004) in text
