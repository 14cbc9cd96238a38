"""
Dense linear programming
Two-phase tableau simplex with Bland's anti-cycling rule and equilibration scaling.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConditioningError, DomainError, ShapeError

logger = logging.getLogger(__name__)

Bound = Tuple[Optional[float], Optional[float]]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def _matrix(rows: Optional[np.ndarray], width: int, name: str) -> np.ndarray:
    if rows is None:
        return np.zeros((0, width))
    matrix = np.atleast_2d(np.array(rows, dtype=float))
    if matrix.size == 0:
        return np.zeros((0, width))
    if matrix.shape[1] != width:
        raise ShapeError(f"{name} has {matrix.shape[1]} columns for {width} variables")
    return matrix


def _vector(values: Optional[np.ndarray], length: int, name: str) -> np.ndarray:
    if values is None:
        vector = np.zeros(0)
    else:
        vector = np.array(values, dtype=float).ravel()
    if vector.size != length:
        raise ShapeError(f"{name} has {vector.size} entries for {length} rows")
    return vector


@dataclass
class LinearProgram:
    """min/max c.x subject to equality rows, <= rows and variable bounds (default x >= 0)"""

    objective: np.ndarray
    eq_matrix: Optional[np.ndarray] = None
    eq_rhs: Optional[np.ndarray] = None
    ub_matrix: Optional[np.ndarray] = None
    ub_rhs: Optional[np.ndarray] = None
    bounds: Optional[Sequence[Bound]] = None
    sense: str = "min"

    def __post_init__(self):
        self.objective = np.array(self.objective, dtype=float).ravel()
        n = self.objective.size
        self.eq_matrix = _matrix(self.eq_matrix, n, "equality matrix")
        self.eq_rhs = _vector(self.eq_rhs, self.eq_matrix.shape[0], "equality rhs")
        self.ub_matrix = _matrix(self.ub_matrix, n, "inequality matrix")
        self.ub_rhs = _vector(self.ub_rhs, self.ub_matrix.shape[0], "inequality rhs")
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        if len(self.bounds) != n:
            raise ShapeError(f"{len(self.bounds)} bounds for {n} variables")
        if self.sense not in ("min", "max"):
            raise DomainError(f"LP sense must be 'min' or 'max', got {self.sense!r}")
        for array in (self.objective, self.eq_matrix, self.eq_rhs, self.ub_matrix, self.ub_rhs):
            if not np.all(np.isfinite(array)):
                raise DomainError("LP coefficients must be finite")

    @property
    def num_vars(self) -> int:
        return self.objective.size


@dataclass
class LpOutcome:
    """Solver result; duals are sensitivities of the optimal value to each right-hand side"""

    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    eq_duals: Optional[np.ndarray] = None
    ub_duals: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _StandardForm:
    """min c.z s.t. A z (<=|=) b, z >= 0, with x = offset + transform z"""

    matrix: np.ndarray
    rhs: np.ndarray
    is_eq: np.ndarray
    cost: np.ndarray
    offset: np.ndarray
    transform: np.ndarray
    n_eq: int
    n_ub: int
    infeasible_bounds: bool = False


def _standard_form(lp: LinearProgram) -> _StandardForm:
    n = lp.num_vars
    columns: List[np.ndarray] = []
    offset = np.zeros(n)
    bound_rows: List[Tuple[int, float]] = []
    infeasible = False
    for j, (lo, hi) in enumerate(lp.bounds):
        unit = np.zeros(n)
        unit[j] = 1.0
        if lo is not None and np.isfinite(lo):
            offset[j] = lo
            columns.append(unit)
            if hi is not None and np.isfinite(hi):
                if hi < lo:
                    infeasible = True
                bound_rows.append((len(columns) - 1, hi - lo))
        elif hi is not None and np.isfinite(hi):
            offset[j] = hi
            columns.append(-unit)
        else:
            columns.append(unit)
            columns.append(-unit)
    transform = np.column_stack(columns) if columns else np.zeros((n, 0))
    n_std = transform.shape[1]

    eq_rows = lp.eq_matrix @ transform
    eq_rhs = lp.eq_rhs - lp.eq_matrix @ offset
    ub_rows = lp.ub_matrix @ transform
    ub_rhs = lp.ub_rhs - lp.ub_matrix @ offset
    extra = np.zeros((len(bound_rows), n_std))
    extra_rhs = np.zeros(len(bound_rows))
    for r, (col, width) in enumerate(bound_rows):
        extra[r, col] = 1.0
        extra_rhs[r] = width
    matrix = np.vstack([eq_rows, ub_rows, extra])
    rhs = np.concatenate([eq_rhs, ub_rhs, extra_rhs])
    is_eq = np.concatenate([np.ones(eq_rows.shape[0], bool), np.zeros(ub_rows.shape[0] + len(bound_rows), bool)])
    cost = transform.T @ lp.objective
    if lp.sense == "max":
        cost = -cost
    return _StandardForm(
        matrix, rhs, is_eq, cost, offset, transform,
        lp.eq_matrix.shape[0], lp.ub_matrix.shape[0], infeasible
    )


class SimplexSolver:
    """Two-phase dense tableau simplex using Bland's rule"""

    def __init__(
        self,
        feasibility_tol: float = 1e-9,
        optimality_tol: float = 1e-9,
        pivot_tol: float = 1e-11,
        max_iterations: Optional[int] = None
    ):
        """
        Initialize the solver

        Args:
            feasibility_tol: phase-1 objective threshold and ratio-test pivot threshold
            optimality_tol: reduced costs above -tol count as nonnegative
            pivot_tol: entries below this magnitude never serve as pivots
            max_iterations: pivot cap (default scales with problem size)
        """
        self.feasibility_tol = feasibility_tol
        self.optimality_tol = optimality_tol
        self.pivot_tol = pivot_tol
        self.max_iterations = max_iterations
        self._iterations = 0

    @staticmethod
    def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
        tableau[row] /= tableau[row, col]
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row])

    def _entering(self, costs: np.ndarray, allowed: np.ndarray) -> int:
        # Bland: lowest-index column with a negative reduced cost
        candidates = np.flatnonzero((costs < -self.optimality_tol) & allowed)
        return int(candidates[0]) if candidates.size else -1

    def _leaving(self, tableau: np.ndarray, basis: List[int], col: int) -> int:
        column = tableau[:-1, col]
        rows = np.flatnonzero(column > max(self.feasibility_tol, self.pivot_tol))
        if rows.size == 0:
            return -1
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        # Bland: among tied rows, the one whose basic variable has the lowest index
        return int(min(tied, key=lambda r: basis[r]))

    def _run(self, tableau: np.ndarray, basis: List[int], allowed: np.ndarray, limit: int) -> Tuple[str, int]:
        while True:
            col = self._entering(tableau[-1, :-1], allowed)
            if col < 0:
                return OPTIMAL, -1
            row = self._leaving(tableau, basis, col)
            if row < 0:
                return UNBOUNDED, col
            self._pivot(tableau, row, col)
            basis[row] = col
            self._iterations += 1
            if self._iterations > limit:
                raise ConditioningError(f"Simplex exceeded {limit} pivots")
            if not np.isfinite(tableau[-1, -1]):
                raise ConditioningError("Non-finite values in the simplex tableau")

    @staticmethod
    def _price_out(tableau: np.ndarray, basis: List[int], costs: np.ndarray) -> None:
        tableau[-1, :-1] = costs
        tableau[-1, -1] = 0.0
        for r, b in enumerate(basis):
            if costs[b] != 0.0:
                tableau[-1] -= costs[b] * tableau[r]

    def solve(self, lp: LinearProgram) -> LpOutcome:
        """
        Solve a linear program

        Args:
            lp: linear program

        Returns:
            Outcome with status, solution, objective, duals or an improving ray
        """
        self._iterations = 0
        form = _standard_form(lp)
        if form.infeasible_bounds:
            return LpOutcome(INFEASIBLE)
        m, n_std = form.matrix.shape

        # equilibration: rows then columns to unit max-abs
        row_scale = np.ones(m)
        if m:
            row_max = np.max(np.abs(form.matrix), axis=1) if n_std else np.zeros(m)
            row_scale = np.where(row_max > 0, 1.0 / np.where(row_max > 0, row_max, 1.0), 1.0)
        scaled = form.matrix * row_scale[:, None]
        col_scale = np.ones(n_std)
        if m and n_std:
            col_max = np.max(np.abs(scaled), axis=0)
            col_scale = np.where(col_max > 0, 1.0 / np.where(col_max > 0, col_max, 1.0), 1.0)
        scaled = scaled * col_scale[None, :]
        rhs = form.rhs * row_scale
        cost = form.cost * col_scale

        flip = rhs < 0
        sign = np.where(flip, -1.0, 1.0)
        scaled = scaled * sign[:, None]
        rhs = rhs * sign

        has_slack = ~form.is_eq
        needs_art = form.is_eq | flip
        slack_cols = np.cumsum(has_slack) - 1 + n_std
        n_slack = int(has_slack.sum())
        art_cols = np.cumsum(needs_art) - 1 + n_std + n_slack
        n_art = int(needs_art.sum())
        width = n_std + n_slack + n_art

        tableau = np.zeros((m + 1, width + 1))
        tableau[:m, :n_std] = scaled
        tableau[:m, -1] = rhs
        basis: List[int] = []
        identity_col = np.empty(m, dtype=int)
        for i in range(m):
            if has_slack[i]:
                # a flipped <= row becomes >=, so its slack enters with -1
                tableau[i, slack_cols[i]] = -1.0 if flip[i] else 1.0
            if needs_art[i]:
                tableau[i, art_cols[i]] = 1.0
                basis.append(int(art_cols[i]))
                identity_col[i] = art_cols[i]
            else:
                basis.append(int(slack_cols[i]))
                identity_col[i] = slack_cols[i]

        limit = self.max_iterations or 50 * (m + width) + 1000
        is_art = np.zeros(width, dtype=bool)
        is_art[n_std + n_slack:] = True

        if n_art:
            phase1 = np.where(is_art, 1.0, 0.0)
            self._price_out(tableau, basis, phase1)
            self._run(tableau, basis, np.ones(width, dtype=bool), limit)
            infeasibility = -tableau[-1, -1]
            if infeasibility > self.feasibility_tol * max(1.0, float(np.max(np.abs(rhs), initial=0.0))):
                logger.debug("LP infeasible: phase-1 residual %.3g after %d pivots", infeasibility, self._iterations)
                return LpOutcome(INFEASIBLE, iterations=self._iterations)
            tableau, basis, identity_col, kept_rows = self._drive_out(tableau, basis, identity_col, is_art)
        else:
            kept_rows = np.arange(m)

        phase2 = np.concatenate([cost, np.zeros(n_slack + n_art)])
        self._price_out(tableau, basis, phase2)
        status, entering = self._run(tableau, basis, ~is_art, limit)
        transform = form.transform * col_scale[None, :]

        if status == UNBOUNDED:
            direction = np.zeros(width)
            direction[entering] = 1.0
            for r, b in enumerate(basis):
                direction[b] = -tableau[r, entering]
            ray = transform @ direction[:n_std]
            logger.debug("LP unbounded after %d pivots", self._iterations)
            return LpOutcome(UNBOUNDED, ray=ray, iterations=self._iterations)

        solution = np.zeros(width)
        for r, b in enumerate(basis):
            solution[b] = tableau[r, -1]
        x = form.offset + transform @ solution[:n_std]

        duals_scaled = np.zeros(m)
        duals_scaled[kept_rows] = -tableau[-1, identity_col]
        duals = duals_scaled * sign * row_scale
        if lp.sense == "max":
            duals = -duals
        self._check_feasible(lp, x)
        logger.debug("LP optimal after %d pivots (%d rows, %d columns)", self._iterations, m, width)
        return LpOutcome(
            OPTIMAL,
            x=x,
            objective=float(lp.objective @ x),
            eq_duals=duals[:form.n_eq],
            ub_duals=duals[form.n_eq:form.n_eq + form.n_ub],
            iterations=self._iterations
        )

    def _drive_out(
        self,
        tableau: np.ndarray,
        basis: List[int],
        identity_col: np.ndarray,
        is_art: np.ndarray
    ) -> Tuple[np.ndarray, List[int], np.ndarray, np.ndarray]:
        """Pivot zero-level artificials out of the basis; drop rows that are redundant"""
        redundant: List[int] = []
        for r in range(len(basis)):
            if not is_art[basis[r]]:
                continue
            row = tableau[r, :-1]
            candidates = np.flatnonzero((np.abs(row) > self.feasibility_tol) & ~is_art)
            if candidates.size:
                col = int(candidates[0])
                self._pivot(tableau, r, col)
                basis[r] = col
            else:
                redundant.append(r)
        kept = np.array([r for r in range(len(basis)) if r not in set(redundant)], dtype=int)
        if redundant:
            logger.debug("Dropping %d redundant equality rows", len(redundant))
            tableau = np.vstack([tableau[kept], tableau[-1:]])
            basis = [basis[r] for r in kept]
            identity_col = identity_col[kept]
        return tableau, basis, identity_col, kept

    @staticmethod
    def _check_feasible(lp: LinearProgram, x: np.ndarray) -> None:
        scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
        tol = 1e-8 * scale * (1.0 + max(
            float(np.max(np.abs(lp.eq_matrix), initial=0.0)),
            float(np.max(np.abs(lp.ub_matrix), initial=0.0))
        ))
        eq_residual = np.max(np.abs(lp.eq_matrix @ x - lp.eq_rhs), initial=0.0)
        ub_residual = np.max(lp.ub_matrix @ x - lp.ub_rhs, initial=0.0)
        bound_residual = 0.0
        for value, (lo, hi) in zip(x, lp.bounds):
            if lo is not None and np.isfinite(lo):
                bound_residual = max(bound_residual, lo - value)
            if hi is not None and np.isfinite(hi):
                bound_residual = max(bound_residual, value - hi)
        worst = max(eq_residual, ub_residual, bound_residual)
        if worst > tol:
            raise ConditioningError(f"Primal residual {worst:.3g} exceeds tolerance {tol:.3g}")


def solve(lp: LinearProgram, tolerance: float = 1e-9) -> LpOutcome:
    """
    Solve a linear program with the default solver

    Args:
        lp: linear program
        tolerance: feasibility and optimality tolerance

    Returns:
        Solver outcome
    """
    return SimplexSolver(feasibility_tol=tolerance, optimality_tol=tolerance).solve(lp)
