"""Standard-form linear programming by revised simplex.

Maximizes c.x subject to mixed <=/=/>= rows and x >= 0. Two-phase method
with artificial variables, Bland's smallest-index rule for both entering
and leaving choices (guaranteed termination at the price of speed), and a
dense-LU basis with product-form eta updates refreshed every few dozen
pivots. Callers that know a feasible basis can pass it as a hint to skip
phase one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

OPTIMALITY_TOL = 1e-9  # reduced-cost threshold for entering candidates
FEASIBILITY_TOL = 1e-6  # constraint satisfaction / phase-1 residual
PIVOT_TOL = 1e-9
RATIO_TIE_TOL = 1e-9
REFACTOR_INTERVAL = 250

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"

RELATIONS = ("<=", "=", ">=")


class LpError(ValueError):
    """Malformed program or solver failure."""


class SingularBasisError(LpError):
    """Basis factorization broke down numerically."""


@dataclass(frozen=True)
class Constraint:
    """One sparse row: sum(values[k] * x[indices[k]]) relation rhs."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    relation: str
    rhs: float

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise LpError(f"unknown relation {self.relation!r}")
        if len(self.indices) != len(self.values):
            raise LpError("constraint indices and values differ in length")
        if not np.isfinite(self.rhs) or not all(np.isfinite(v) for v in self.values):
            raise LpError("constraint coefficients must be finite")


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Maximization over non-negative variables with sparse rows."""

    n: int
    objective: np.ndarray
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        objective = np.asarray(self.objective, dtype=float)
        if objective.shape != (self.n,):
            raise LpError(f"objective length {objective.shape} does not match n={self.n}")
        if not np.all(np.isfinite(objective)):
            raise LpError("objective must be finite")
        object.__setattr__(self, "objective", objective)
        for row in self.constraints:
            if row.indices and (min(row.indices) < 0 or max(row.indices) >= self.n):
                raise LpError("constraint index outside variable range")


@dataclass(frozen=True)
class LpSolution:
    status: str
    values: np.ndarray | None
    objective_value: float | None
    iterations: int = 0


class _Basis:
    """Dense LU of the basis matrix with product-form eta updates."""

    def __init__(self, columns: scipy.sparse.csc_matrix):
        self._A = columns
        self._m = columns.shape[0]
        self._lu = None
        self._piv = None
        self.etas: list[tuple[int, np.ndarray]] = []

    def factor(self, basis: np.ndarray) -> None:
        B = self._A[:, basis].toarray()
        lu, piv = scipy.linalg.lu_factor(B, overwrite_a=True, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.min() <= 1e-11 * max(1.0, diag.max()):
            raise SingularBasisError("basis matrix is numerically singular")
        self._lu, self._piv = lu, piv
        self.etas.clear()

    def ftran(self, v: np.ndarray) -> np.ndarray:
        x = scipy.linalg.lu_solve((self._lu, self._piv), v, check_finite=False)
        for r, d in self.etas:
            t = x[r] / d[r]
            if t != 0.0:
                x -= d * t
            x[r] = t
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        y = v.astype(float, copy=True)
        for r, d in reversed(self.etas):
            yr = (y[r] - d @ y + d[r] * y[r]) / d[r]
            y[r] = yr
        return scipy.linalg.lu_solve((self._lu, self._piv), y, trans=1, check_finite=False)

    def push_eta(self, row: int, direction: np.ndarray) -> None:
        self.etas.append((row, direction))

    @property
    def stale(self) -> bool:
        return len(self.etas) >= REFACTOR_INTERVAL


class _Standardized:
    """The program rewritten with slack, surplus, and artificial columns."""

    def __init__(self, lp: LinearProgram):
        m = len(lp.constraints)
        self.n_structural = lp.n
        rows: list[tuple[int, ...]] = []
        vals: list[tuple[float, ...]] = []
        relations: list[str] = []
        b = np.zeros(m)
        for i, row in enumerate(lp.constraints):
            indices, values, relation, rhs = row.indices, row.values, row.relation, row.rhs
            if rhs < 0.0:
                values = tuple(-v for v in values)
                rhs = -rhs
                relation = {"<=": ">=", ">=": "<=", "=": "="}[relation]
            rows.append(indices)
            vals.append(values)
            relations.append(relation)
            b[i] = rhs
        self.b = b
        self.relations = relations

        # Column layout: structural | slack or surplus | artificial.
        self.slack_col = np.full(m, -1, dtype=int)
        self.artificial_col = np.full(m, -1, dtype=int)
        next_col = lp.n
        for i, rel in enumerate(relations):
            if rel in ("<=", ">="):
                self.slack_col[i] = next_col
                next_col += 1
        for i, rel in enumerate(relations):
            if rel in ("=", ">="):
                self.artificial_col[i] = next_col
                next_col += 1
        self.n_total = next_col
        self.first_artificial = int(min(
            (c for c in self.artificial_col if c >= 0), default=next_col))

        coo_rows: list[int] = []
        coo_cols: list[int] = []
        coo_data: list[float] = []
        for i in range(m):
            coo_rows.extend([i] * len(rows[i]))
            coo_cols.extend(rows[i])
            coo_data.extend(vals[i])
            if self.slack_col[i] >= 0:
                coo_rows.append(i)
                coo_cols.append(self.slack_col[i])
                coo_data.append(1.0 if relations[i] == "<=" else -1.0)
            if self.artificial_col[i] >= 0:
                coo_rows.append(i)
                coo_cols.append(self.artificial_col[i])
                coo_data.append(1.0)
        self.A = scipy.sparse.csc_matrix(
            (coo_data, (coo_rows, coo_cols)), shape=(m, self.n_total))
        self.AT = self.A.T.tocsr()
        self.is_artificial = np.zeros(self.n_total, dtype=bool)
        for c in self.artificial_col:
            if c >= 0:
                self.is_artificial[c] = True

    def column(self, j: int) -> np.ndarray:
        start, end = self.A.indptr[j], self.A.indptr[j + 1]
        col = np.zeros(self.A.shape[0])
        col[self.A.indices[start:end]] = self.A.data[start:end]
        return col

    def default_basis(self) -> np.ndarray:
        basis = np.where(self.artificial_col >= 0, self.artificial_col, self.slack_col)
        if np.any(basis < 0):  # pragma: no cover - every row gets one or the other
            raise LpError("internal error building the initial basis")
        return basis.astype(int)


def solve_lp(
    lp: LinearProgram,
    basis_hint: Sequence[int] | None = None,
    max_iterations: int | None = None,
) -> LpSolution:
    """Optimal basic solution, or a correct infeasible/unbounded verdict.

    ``basis_hint`` optionally names one basic column per constraint row
    (a structural index, or -1 for the row's own slack). A valid feasible
    hint skips phase one; an unusable hint silently falls back to the
    standard two-phase start.
    """
    m = len(lp.constraints)
    if m == 0:
        if np.any(lp.objective > OPTIMALITY_TOL):
            return LpSolution(STATUS_UNBOUNDED, None, None)
        return LpSolution(STATUS_OPTIMAL, np.zeros(lp.n), 0.0)

    std = _Standardized(lp)
    if max_iterations is None:
        max_iterations = max(200_000, 100 * (m + std.n_total))

    basis_factory = _Basis(std.A)
    basis, x_basic, phase = _initial_state(lp, std, basis_factory, basis_hint)

    c_phase1 = np.zeros(std.n_total)
    c_phase1[std.is_artificial] = -1.0
    c_phase2 = np.zeros(std.n_total)
    c_phase2[: lp.n] = lp.objective

    # Artificial columns never (re)enter the basis; phase one only drives
    # the initially-basic ones down to zero.
    allowed = ~std.is_artificial

    iterations = 0
    while True:
        c = c_phase1 if phase == 1 else c_phase2
        status, basis, x_basic, spent = _simplex(
            std, basis_factory, basis, x_basic, c, allowed,
            pin_artificials=(phase == 2),
            iteration_budget=max_iterations - iterations)
        iterations += spent
        if status == "iteration_limit":
            raise LpError(f"simplex exceeded {max_iterations} iterations")
        if phase == 1:
            if status == "unbounded":  # pragma: no cover - phase 1 is bounded
                raise LpError("phase one reported unbounded; numerical breakdown")
            infeasibility = float(np.sum(x_basic[std.is_artificial[basis]]))
            if infeasibility > FEASIBILITY_TOL:
                return LpSolution(STATUS_INFEASIBLE, None, None, iterations)
            phase = 2
            continue
        if status == "unbounded":
            return LpSolution(STATUS_UNBOUNDED, None, None, iterations)
        break

    # Extract from a fresh factorization so eta-chain drift cannot leak
    # into the reported solution.
    basis_factory.factor(basis)
    x_basic = np.maximum(basis_factory.ftran(std.b.copy()), 0.0)
    values = np.zeros(std.n_total)
    values[basis] = x_basic
    structural = values[: lp.n].copy()
    return LpSolution(
        STATUS_OPTIMAL, structural, float(lp.objective @ structural), iterations)


def _initial_state(lp, std, basis_factory, basis_hint):
    """Choose the starting basis: caller hint if usable, else phase-1 setup."""
    if basis_hint is not None:
        if len(basis_hint) != len(lp.constraints):
            raise LpError("basis hint must name one column per constraint")
        cols = []
        usable = True
        for i, entry in enumerate(basis_hint):
            if entry == -1:
                if std.slack_col[i] < 0 or std.relations[i] != "<=":
                    usable = False
                    break
                cols.append(std.slack_col[i])
            else:
                if not 0 <= entry < lp.n:
                    raise LpError(f"basis hint column {entry} out of range")
                cols.append(int(entry))
        if usable:
            basis = np.asarray(cols, dtype=int)
            try:
                basis_factory.factor(basis)
            except SingularBasisError:
                basis = None
            if basis is not None:
                x_basic = basis_factory.ftran(std.b.copy())
                if x_basic.min() >= -1e-9:
                    return basis, np.maximum(x_basic, 0.0), 2
    basis = std.default_basis()
    basis_factory.factor(basis)
    x_basic = std.b.copy()
    phase = 1 if np.any(std.is_artificial[basis]) else 2
    return basis, x_basic, phase


def _simplex(std, factors, basis, x_basic, c, allowed, pin_artificials, iteration_budget):
    """Run Bland-rule pivots until optimal/unbounded or the budget ends."""
    in_basis = np.zeros(std.n_total, dtype=bool)
    in_basis[basis] = True
    iterations = 0

    while True:
        if iterations >= iteration_budget:
            return "iteration_limit", basis, x_basic, iterations
        if factors.stale:
            factors.factor(basis)
            x_basic = np.maximum(factors.ftran(std.b.copy()), 0.0)

        y = factors.btran(c[basis])
        reduced = c - std.AT @ y
        candidates = (reduced > OPTIMALITY_TOL) & allowed & ~in_basis
        entering_list = np.flatnonzero(candidates)
        if entering_list.size == 0:
            return "optimal", basis, x_basic, iterations
        q = int(entering_list[0])  # Bland: smallest eligible index

        direction = factors.ftran(std.column(q))

        # Ratio test. Rows with positive direction bound the step; in phase
        # two, rows whose basic variable is an artificial held at zero also
        # block whenever the step would push them positive again.
        blocking = direction > PIVOT_TOL
        if pin_artificials:
            pinned = std.is_artificial[basis] & (direction < -PIVOT_TOL)
        else:
            pinned = np.zeros(len(basis), dtype=bool)
        if not blocking.any() and not pinned.any():
            return "unbounded", basis, x_basic, iterations

        theta = np.inf
        if blocking.any():
            ratios = np.maximum(x_basic[blocking], 0.0) / direction[blocking]
            theta = float(ratios.min())
        if pinned.any():
            theta = min(theta, 0.0)

        tie_tol = RATIO_TIE_TOL * max(1.0, abs(theta))
        leaving_row = -1
        leaving_var = None
        for i in np.flatnonzero(blocking | pinned):
            ratio = max(x_basic[i], 0.0) / direction[i] if direction[i] > PIVOT_TOL else 0.0
            if ratio <= theta + tie_tol:
                var = basis[i]
                if leaving_var is None or var < leaving_var:  # Bland tie-break
                    leaving_var, leaving_row = var, i

        theta = max(theta, 0.0)
        x_basic = x_basic - theta * direction
        x_basic[leaving_row] = theta
        in_basis[basis[leaving_row]] = False
        in_basis[q] = True
        basis[leaving_row] = q
        factors.push_eta(leaving_row, direction)
        iterations += 1


def residuals(lp: LinearProgram, values: np.ndarray) -> np.ndarray:
    """Signed constraint violations of a candidate point (positive = violated)."""
    out = np.zeros(len(lp.constraints))
    for i, row in enumerate(lp.constraints):
        lhs = sum(v * values[j] for j, v in zip(row.indices, row.values))
        if row.relation == "<=":
            out[i] = lhs - row.rhs
        elif row.relation == ">=":
            out[i] = row.rhs - lhs
        else:
            out[i] = abs(lhs - row.rhs)
    return out


def write_lp_text(path, lp: LinearProgram, name: str = "program") -> None:
    """Dump in LP interchange text format (maximize, named rows, x >= 0)."""
    with open(path, "w") as fh:
        fh.write(f"\\* {name} *\\\n")
        fh.write("Maximize\n obj:")
        fh.write(_terms(np.flatnonzero(lp.objective), lp.objective))
        fh.write("\nSubject To\n")
        for i, row in enumerate(lp.constraints):
            rel = {"<=": "<=", ">=": ">=", "=": "="}[row.relation]
            fh.write(f" c{i}:")
            fh.write(_terms(row.indices, dict(zip(row.indices, row.values))))
            fh.write(f" {rel} {format(row.rhs, '.12g')}\n")
        fh.write("Bounds\n")
        fh.write("\\* all variables default to >= 0 *\\\n")
        fh.write("End\n")


def _terms(indices, coefficients) -> str:
    parts = []
    for j in indices:
        coef = coefficients[j]
        if coef == 0.0:
            continue
        sign = " +" if coef >= 0 else " -"
        parts.append(f"{sign} {format(abs(coef), '.12g')} y{j}")
    if not parts:
        return " 0 y0"
    return "".join(parts)
