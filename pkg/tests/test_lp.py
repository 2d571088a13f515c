import numpy as np
import pytest

import oracles

from obsplan.lp import (
    Constraint,
    LinearProgram,
    LpError,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    residuals,
    solve_lp,
    write_lp_text,
)


def dense_lp(objective, rows, relations, rhs):
    objective = np.asarray(objective, dtype=float)
    constraints = []
    for row, rel, b in zip(rows, relations, rhs):
        idx = tuple(range(len(row)))
        constraints.append(Constraint(idx, tuple(float(v) for v in row), rel, float(b)))
    return LinearProgram(len(objective), objective, tuple(constraints))


def random_feasible_lp(rng, n=None, m=None):
    """Bounded feasible LP with a known interior-ish point."""
    n = n or int(rng.integers(2, 7))
    m = m or int(rng.integers(2, 7))
    A = rng.uniform(-2.0, 2.0, size=(m, n))
    x0 = rng.uniform(0.5, 2.0, size=n)
    relations, rhs = [], []
    for i in range(m):
        roll = rng.random()
        value = float(A[i] @ x0)
        if roll < 0.2:
            relations.append("=")
            rhs.append(value)
        elif roll < 0.6:
            relations.append("<=")
            rhs.append(value + float(rng.uniform(0.1, 1.0)))
        else:
            relations.append(">=")
            rhs.append(value - float(rng.uniform(0.1, 1.0)))
    # Bounding box keeps the region compact so vertex enumeration is exact.
    A = np.vstack([A, np.ones(n)])
    relations.append("<=")
    rhs.append(float(np.sum(x0) + rng.uniform(1.0, 3.0)))
    c = rng.uniform(-1.0, 2.0, size=n)
    return dense_lp(c, A, relations, rhs), (c, A, relations, rhs)


class TestBasics:
    def test_two_variable_box(self):
        lp = dense_lp([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]], ["<=", "<="], [1.0, 1.0])
        sol = solve_lp(lp)
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value == pytest.approx(2.0)
        assert sol.values == pytest.approx([1.0, 1.0])

    def test_infeasible_sign_conflict(self):
        lp = dense_lp([1.0], [[1.0]], ["<="], [-1.0])
        assert solve_lp(lp).status == STATUS_INFEASIBLE

    def test_infeasible_pair(self):
        lp = dense_lp([1.0], [[1.0], [1.0]], [">=", "<="], [2.0, 1.0])
        assert solve_lp(lp).status == STATUS_INFEASIBLE

    def test_unbounded(self):
        lp = dense_lp([1.0, 0.0], [[0.0, 1.0]], ["<="], [1.0])
        assert solve_lp(lp).status == STATUS_UNBOUNDED

    def test_unbounded_with_constraints_on_other_vars(self):
        lp = dense_lp([0.0, 1.0], [[1.0, -1.0]], ["<="], [3.0])
        assert solve_lp(lp).status == STATUS_UNBOUNDED

    def test_equality_rows(self):
        lp = dense_lp([1.0, 2.0], [[1.0, 1.0]], ["="], [1.0])
        sol = solve_lp(lp)
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value == pytest.approx(2.0)
        assert sol.values == pytest.approx([0.0, 1.0])

    def test_no_constraints(self):
        lp = LinearProgram(2, np.array([0.0, -1.0]), ())
        sol = solve_lp(lp)
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value == 0.0

    def test_zero_rhs_equalities(self):
        lp = dense_lp([1.0, 1.0], [[1.0, -1.0], [1.0, 1.0]], ["=", "<="], [0.0, 4.0])
        sol = solve_lp(lp)
        assert sol.objective_value == pytest.approx(4.0)
        assert sol.values == pytest.approx([2.0, 2.0])


class TestAntiCycling:
    def test_beale_cycling_example(self):
        # A classic tableau that cycles under naive pivoting.
        lp = dense_lp(
            [0.75, -150.0, 0.02, -6.0],
            [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]],
            ["<=", "<=", "<="],
            [0.0, 0.0, 1.0],
        )
        sol = solve_lp(lp)
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value == pytest.approx(0.05)

    def test_marshall_suurballe_example(self):
        lp = dense_lp(
            [0.4, 0.4, -1.8],
            [[0.6, -6.4, 4.8], [0.2, -1.8, 0.6], [0.4, -1.6, 0.2], [0.0, 1.0, 0.0]],
            ["<=", "<=", "<=", "<="],
            [0.0, 0.0, 0.0, 1.0],
        )
        sol = solve_lp(lp)
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value > 0.0


class TestAgainstVertexOracle:
    @pytest.mark.parametrize("seed", range(12))
    def test_random_feasible(self, seed):
        rng = np.random.default_rng(100 + seed)
        lp, (c, A, relations, rhs) = random_feasible_lp(rng)
        sol = solve_lp(lp)
        assert sol.status == STATUS_OPTIMAL
        best, _ = oracles.lp_vertex_optimum(c, A, relations, rhs)
        assert best is not None
        assert sol.objective_value == pytest.approx(best, abs=1e-6)

    def test_wide_problem_few_rows(self):
        # Many variables, few constraints: still enumerable because only
        # n - m variables can be nonzero at a vertex... the oracle handles
        # it by including the non-negativity planes.
        rng = np.random.default_rng(77)
        n, m = 12, 2
        A = rng.uniform(0.1, 1.0, size=(m, n))
        rhs = [4.0, 5.0]
        relations = ["<=", "<="]
        c = rng.uniform(0.0, 1.0, size=n)
        lp = dense_lp(c, A, relations, rhs)
        sol = solve_lp(lp)
        best, _ = oracles.lp_vertex_optimum(c, A, relations, rhs)
        assert sol.objective_value == pytest.approx(best, abs=1e-6)


class TestSolutionQuality:
    @pytest.mark.parametrize("seed", [3, 14, 159])
    def test_feasibility_of_reported_optimum(self, seed):
        rng = np.random.default_rng(seed)
        lp, _ = random_feasible_lp(rng)
        sol = solve_lp(lp)
        assert sol.status == STATUS_OPTIMAL
        assert np.all(sol.values >= -1e-9)
        assert residuals(lp, sol.values).max() <= 1e-6

    def test_determinism(self):
        rng = np.random.default_rng(8)
        lp, _ = random_feasible_lp(rng)
        a = solve_lp(lp)
        b = solve_lp(lp)
        assert a.status == b.status == STATUS_OPTIMAL
        assert np.array_equal(a.values, b.values)
        assert a.iterations == b.iterations

    def test_objective_scaling(self):
        rng = np.random.default_rng(21)
        lp, (c, A, relations, rhs) = random_feasible_lp(rng)
        scaled = dense_lp(5.0 * np.asarray(c), A, relations, rhs)
        sol = solve_lp(lp)
        sol5 = solve_lp(scaled)
        assert sol5.objective_value == pytest.approx(5.0 * sol.objective_value, rel=1e-9)
        assert sol5.values == pytest.approx(sol.values, abs=1e-8)

    def test_weak_duality_spot_check(self):
        # For max c.x s.t. Ax <= b, x >= 0: any y >= 0 with A^T y >= c
        # bounds the optimum by b.y.
        rng = np.random.default_rng(33)
        n, m = 4, 5
        A = rng.uniform(0.2, 1.5, size=(m, n))
        b = rng.uniform(1.0, 3.0, size=m)
        c = rng.uniform(0.1, 1.0, size=n)
        lp = dense_lp(c, A, ["<="] * m, b)
        sol = solve_lp(lp)
        for _ in range(50):
            y = rng.uniform(0.0, 3.0, size=m)
            if np.all(A.T @ y >= c - 1e-12):
                assert sol.objective_value <= float(b @ y) + 1e-9


class TestBasisHint:
    def test_valid_hint_skips_phase_one(self):
        lp = dense_lp([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]], ["<=", "<="], [1.0, 1.0])
        sol = solve_lp(lp, basis_hint=[-1, -1])
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value == pytest.approx(2.0)

    def test_structural_hint(self):
        lp = dense_lp([1.0, 2.0], [[1.0, 1.0]], ["="], [1.0])
        sol = solve_lp(lp, basis_hint=[1])
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value == pytest.approx(2.0)

    def test_infeasible_hint_falls_back(self):
        # Hinting the slack of a row whose slack would be negative must not
        # break anything: the solver reverts to the two-phase start.
        lp = dense_lp([1.0, 1.0], [[1.0, 1.0], [1.0, 0.0]], ["<=", ">="], [4.0, 1.0])
        sol = solve_lp(lp, basis_hint=[-1, 0])
        assert sol.status == STATUS_OPTIMAL
        assert sol.objective_value == pytest.approx(4.0)

    def test_bad_hint_length_rejected(self):
        lp = dense_lp([1.0], [[1.0]], ["<="], [1.0])
        with pytest.raises(LpError):
            solve_lp(lp, basis_hint=[0, 1])


class TestValidation:
    def test_dimension_mismatch(self):
        with pytest.raises(LpError):
            LinearProgram(2, np.array([1.0]), ())

    def test_index_out_of_range(self):
        with pytest.raises(LpError):
            LinearProgram(1, np.array([1.0]), (Constraint((1,), (1.0,), "<=", 0.0),))

    def test_bad_relation(self):
        with pytest.raises(LpError):
            Constraint((0,), (1.0,), "<", 0.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(LpError):
            Constraint((0,), (float("nan"),), "<=", 0.0)


class TestExport:
    def test_text_round_shape(self, tmp_path):
        lp = dense_lp([1.0, 0.5], [[1.0, 1.0], [2.0, 0.0]], ["<=", ">="], [3.0, 1.0])
        path = tmp_path / "prog.lp"
        write_lp_text(path, lp, name="toy")
        text = path.read_text()
        assert "Maximize" in text and "Subject To" in text and text.rstrip().endswith("End")
        assert "c0:" in text and "c1:" in text
        assert ">= 1" in text
