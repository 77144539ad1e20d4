"""
MILP instances and their LP relaxations.

``MilpInstance`` holds a minimisation problem in the all-``<=`` form

    min c'x  s.t.  A x <= b,  lower <= x <= upper,  x_j integer for j in I

and ``solve_lp`` solves its relaxation with a two-phase revised simplex
method. The simplex works on a shifted standard form: ``y = x - lower``,
finite upper bounds become explicit rows, and every row gets a slack column.
The resulting tableau rows are exposed for Gomory cut generation.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import DimensionMismatch, NumericalFailure
from HierarchicalCutSelector.models.dtos import InstanceDTO, LpStatus, RowDTO, RowRelation

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
PIVOT_TOL = 1e-9
OPTIMALITY_TOL = 1e-9
DEGENERACY_LIMIT = 50
REFACTOR_EVERY = 50


def is_integral(value: float, tol: float = INTEGRALITY_TOL) -> bool:
    """Return True when *value* lies within *tol* of an integer."""
    return abs(value - round(value)) <= tol


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    """A sparse ``<=`` row: sum(values[k] * x[indices[k]]) <= rhs."""
    indices: Tuple[int, ...]
    values: Tuple[float, ...]
    rhs: float


@dataclass(frozen=True)
class MilpInstance:
    """
    Immutable MILP in minimisation, all-``<=`` form.

    Integer variables have their bounds rounded inwards on construction, so
    every integer variable has an integral lower bound.
    """
    name: str
    c: Tuple[float, ...]
    rows: Tuple[Row, ...]
    integer_set: Tuple[int, ...] = ()
    lower: Tuple[float, ...] = ()
    upper: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.c)
        lower = tuple(float(v) for v in self.lower) if self.lower else (0.0,) * n
        upper = tuple(float(v) for v in self.upper) if self.upper else (math.inf,) * n
        if len(lower) != n or len(upper) != n:
            raise DimensionMismatch(f"Bounds must have {n} entries")

        integer_set = tuple(sorted(set(int(j) for j in self.integer_set)))
        if integer_set and (integer_set[0] < 0 or integer_set[-1] >= n):
            raise DimensionMismatch("Integer index outside 0..n-1")

        lower, upper = list(lower), list(upper)
        for j in integer_set:
            lower[j] = float(math.ceil(lower[j] - INTEGRALITY_TOL))
            if not math.isinf(upper[j]):
                upper[j] = float(math.floor(upper[j] + INTEGRALITY_TOL))
        for j in range(n):
            if not math.isfinite(lower[j]):
                raise ValueError(f"Variable {j} needs a finite lower bound")
            if lower[j] > upper[j]:
                raise ValueError(f"Variable {j} has lower bound above upper bound")

        for i, row in enumerate(self.rows):
            if len(row.indices) != len(row.values):
                raise DimensionMismatch(f"Row {i} has mismatched indices and values")
            if any(j < 0 or j >= n for j in row.indices):
                raise DimensionMismatch(f"Row {i} refers to a variable outside 0..{n - 1}")

        object.__setattr__(self, 'integer_set', integer_set)
        object.__setattr__(self, 'lower', tuple(lower))
        object.__setattr__(self, 'upper', tuple(upper))

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self.rows)

    @cached_property
    def A(self) -> np.ndarray:
        """Dense constraint matrix (m × n)."""
        matrix = np.zeros((self.m, self.n))
        for i, row in enumerate(self.rows):
            for j, v in zip(row.indices, row.values):
                matrix[i, j] += v
        return matrix

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([row.rhs for row in self.rows], dtype=float)

    @cached_property
    def cost(self) -> np.ndarray:
        return np.array(self.c, dtype=float)

    @cached_property
    def integer_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[list(self.integer_set)] = True
        return mask

    def with_bounds(self, lower: Sequence[float], upper: Sequence[float]) -> 'MilpInstance':
        """Return a copy with replaced variable bounds (used for branching)."""
        return replace(self, lower=tuple(lower), upper=tuple(upper))

    def is_feasible(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        """Check rows, bounds and integrality of a candidate point."""
        x = np.asarray(x, dtype=float)
        if np.any(x < np.array(self.lower) - tol) or np.any(x > np.array(self.upper) + tol):
            return False
        if self.m and np.any(self.A @ x > self.b + tol):
            return False
        return all(is_integral(x[j], tol) for j in self.integer_set)

    def to_dto(self) -> InstanceDTO:
        return InstanceDTO(
            name=self.name,
            n=self.n,
            m=self.m,
            c=list(self.c),
            rows=[
                RowDTO(coefs=list(zip(row.indices, row.values)), rhs=row.rhs, rel=RowRelation.LE)
                for row in self.rows
            ],
            integers=list(self.integer_set),
            bounds=list(zip(self.lower, self.upper)),
        )

    @classmethod
    def from_dto(cls, dto: InstanceDTO) -> 'MilpInstance':
        """Build an instance, negating ``>=`` rows and splitting ``=`` rows."""
        rows: List[Row] = []
        for row in dto.rows:
            merged: dict = {}
            for j, v in row.coefs:
                merged[j] = merged.get(j, 0.0) + v
            indices = tuple(merged.keys())
            values = tuple(merged.values())
            negated = tuple(-v for v in values)
            if row.rel in (RowRelation.LE, RowRelation.EQ):
                rows.append(Row(indices, values, row.rhs))
            if row.rel in (RowRelation.GE, RowRelation.EQ):
                rows.append(Row(indices, negated, -row.rhs))
        return cls(
            name=dto.name,
            c=tuple(dto.c),
            rows=tuple(rows),
            integer_set=tuple(dto.integers),
            lower=tuple(lo for lo, _ in dto.bounds),
            upper=tuple(hi for _, hi in dto.bounds),
        )


def load_instance(path: Path) -> MilpInstance:
    """Read an instance from the JSON instance format."""
    return MilpInstance.from_dto(InstanceDTO.model_validate_json(Path(path).read_text()))


def dump_instance(instance: MilpInstance) -> str:
    return instance.to_dto().model_dump_json(indent=2)


def save_instance(instance: MilpInstance, path: Path) -> None:
    Path(path).write_text(dump_instance(instance))


def add_rows(instance: MilpInstance, cuts: Sequence) -> MilpInstance:
    """
    Append cuts as ``<=`` rows in the given order.

    Args:
        instance: The model to extend; it is left untouched.
        cuts: Objects exposing ``indices``, ``values`` and ``beta``.

    Returns:
        A new instance whose rows are the original rows followed by the cuts.
    """
    if not cuts:
        return instance
    new_rows = []
    for cut in cuts:
        if any(j < 0 or j >= instance.n for j in cut.indices):
            raise DimensionMismatch(f"Cut {getattr(cut, 'id', '?')} exceeds n={instance.n}")
        new_rows.append(Row(tuple(cut.indices), tuple(cut.values), float(cut.beta)))
    return replace(instance, rows=instance.rows + tuple(new_rows))


# ---------------------------------------------------------------------------
# Standard form and solutions
# ---------------------------------------------------------------------------

@dataclass
class StandardForm:
    """
    Shifted standard form ``[G | I] z = h``, ``z = (y, s) >= 0``.

    ``G`` stacks the instance rows and one row per finite upper bound;
    ``h0`` is the right-hand side in the original ``x`` space and
    ``h = h0 - G @ lower`` the one in the shifted ``y`` space.
    """
    G: np.ndarray
    h0: np.ndarray
    h: np.ndarray
    lower: np.ndarray
    column_integral: np.ndarray
    n: int
    m: int
    bounded_vars: List[int]

    @property
    def p(self) -> int:
        return self.G.shape[0]

    @classmethod
    def from_instance(cls, instance: MilpInstance) -> 'StandardForm':
        n, m = instance.n, instance.m
        lower = np.array(instance.lower, dtype=float)
        upper = np.array(instance.upper, dtype=float)
        bounded_vars = [j for j in range(n) if math.isfinite(upper[j])]

        bound_rows = np.zeros((len(bounded_vars), n))
        for r, j in enumerate(bounded_vars):
            bound_rows[r, j] = 1.0
        G = np.vstack([instance.A.reshape(m, n), bound_rows])
        h0 = np.concatenate([instance.b, upper[bounded_vars]])
        h = h0 - G @ lower

        integer_mask = instance.integer_mask
        slack_integral = np.zeros(G.shape[0], dtype=bool)
        for r in range(G.shape[0]):
            nz = np.nonzero(G[r])[0]
            slack_integral[r] = (
                bool(np.all(integer_mask[nz]))
                and all(is_integral(v, 1e-9) for v in G[r, nz])
                and is_integral(h0[r], 1e-9)
            )
        column_integral = np.concatenate([integer_mask, slack_integral])
        return cls(G, h0, h, lower, column_integral, n, m, bounded_vars)


@dataclass
class TableauRow:
    """Row of ``B^-1 [G | I]`` for a fractional basic integer variable."""
    variable: int
    coefficients: np.ndarray
    rhs: float


@dataclass
class LpSolution:
    status: LpStatus
    x_star: np.ndarray
    z_lp: float
    basic_columns: Tuple[int, ...] = ()
    tableau_rows: List[TableauRow] = field(default_factory=list)
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    form: Optional[StandardForm] = None

    @property
    def variable_status(self) -> List[str]:
        n = len(self.x_star)
        basic = set(self.basic_columns)
        return ['basic' if j in basic else 'nonbasic' for j in range(n)]

    @property
    def row_status(self) -> List[str]:
        if self.form is None:
            return []
        basic = set(self.basic_columns)
        n = self.form.n
        return ['basic' if n + r in basic else 'nonbasic' for r in range(self.form.m)]

    def fractional_variables(self) -> List[int]:
        return [row.variable for row in self.tableau_rows]


# ---------------------------------------------------------------------------
# Revised simplex
# ---------------------------------------------------------------------------

class RevisedSimplex:
    """
    Revised simplex over ``M z = rhs, z >= 0`` with an explicit basis inverse.

    The inverse is updated by a rank-one product-form step after each pivot
    and recomputed from scratch every ``REFACTOR_EVERY`` pivots. Dantzig
    pricing is used until ``DEGENERACY_LIMIT`` consecutive degenerate pivots,
    after which Bland's rule takes over for the rest of the solve.
    """

    def __init__(self, M: np.ndarray, rhs: np.ndarray, basis: List[int], max_iterations: int) -> None:
        self.M = M
        self.rhs = rhs
        self.basis = list(basis)
        self.max_iterations = max_iterations
        self.iterations = 0
        self.bland = False
        self._degenerate_run = 0
        self._since_refactor = 0
        self._refactor()

    def _refactor(self) -> None:
        if not self.basis:
            self.Binv = np.zeros((0, 0))
            self.xB = np.zeros(0)
            return
        try:
            self.Binv = np.linalg.inv(self.M[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"Singular basis: {exc}") from exc
        self.xB = self.Binv @ self.rhs
        self._since_refactor = 0

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> LpStatus:
        """Pivot to optimality for *cost*; only *allowed* columns may enter."""
        while True:
            y = self.Binv.T @ cost[self.basis]
            reduced = cost - self.M.T @ y
            in_basis = np.zeros(len(cost), dtype=bool)
            in_basis[self.basis] = True
            candidates = np.nonzero(allowed & ~in_basis & (reduced < -OPTIMALITY_TOL))[0]
            if candidates.size == 0:
                return LpStatus.OPTIMAL

            if self.bland:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmin(reduced[candidates])])

            direction = self.Binv @ self.M[:, q]
            positive = np.nonzero(direction > PIVOT_TOL)[0]
            if positive.size == 0:
                return LpStatus.UNBOUNDED

            ratios = np.maximum(self.xB[positive], 0.0) / direction[positive]
            best = ratios.min()
            ties = positive[ratios <= best + 1e-12]
            leave = int(min(ties, key=lambda i: self.basis[i]))

            self._pivot(leave, q, direction)
            if best <= 1e-12:
                self._degenerate_run += 1
                if self._degenerate_run > DEGENERACY_LIMIT and not self.bland:
                    logger.debug("Degeneracy counter tripped; switching to Bland's rule")
                    self.bland = True
            else:
                self._degenerate_run = 0

            if self.iterations >= self.max_iterations:
                raise NumericalFailure(
                    f"Simplex exceeded {self.max_iterations} pivots (degenerate cycling?)"
                )

    def _pivot(self, leave: int, q: int, direction: np.ndarray) -> None:
        pivot = direction[leave]
        eta = -direction / pivot
        eta[leave] = 1.0 / pivot
        row = self.Binv[leave].copy()
        self.Binv += np.outer(eta, row)
        self.Binv[leave] = row / pivot
        self.basis[leave] = q
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self._refactor()
        else:
            self.xB = self.Binv @ self.rhs

    def drive_out(self, artificial: np.ndarray, structural: int) -> None:
        """Pivot zero-level artificial columns out of the basis where possible."""
        for pos, col in enumerate(list(self.basis)):
            if not artificial[col]:
                continue
            row = self.Binv[pos] @ self.M[:, :structural]
            in_basis = set(self.basis)
            choices = [k for k in np.nonzero(np.abs(row) > PIVOT_TOL)[0] if k not in in_basis]
            if choices:
                k = int(max(choices, key=lambda j: abs(row[j])))
                self._pivot(pos, k, self.Binv @ self.M[:, k])


def solve_lp(instance: MilpInstance, max_iterations: int = 5_000) -> LpSolution:
    """
    Solve the LP relaxation of *instance*.

    Args:
        instance: A well-formed instance.
        max_iterations: Pivot cap across both phases.

    Returns:
        LpSolution with status, primal point, objective, basis, duals and the
        tableau rows of every fractional basic integer variable.

    Raises:
        NumericalFailure: when pivoting stalls beyond the cap or the basis
            becomes singular.
    """
    form = StandardForm.from_instance(instance)
    n, p = form.n, form.p
    structural = n + p

    flip = form.h < 0
    signs = np.where(flip, -1.0, 1.0)
    artificial_rows = np.nonzero(flip)[0]
    n_art = artificial_rows.size

    M = np.zeros((p, structural + n_art))
    M[:, :n] = form.G
    M[:, n:structural] = np.eye(p)
    M *= signs[:, None]
    for a, r in enumerate(artificial_rows):
        M[r, structural + a] = 1.0
    rhs = form.h * signs

    basis = [n + r for r in range(p)]
    for a, r in enumerate(artificial_rows):
        basis[r] = structural + a

    is_artificial = np.zeros(structural + n_art, dtype=bool)
    is_artificial[structural:] = True
    simplex = RevisedSimplex(M, rhs, basis, max_iterations)

    if n_art:
        phase_one_cost = is_artificial.astype(float)
        status = simplex.run(phase_one_cost, np.ones(structural + n_art, dtype=bool))
        infeasibility = float(phase_one_cost[simplex.basis] @ simplex.xB)
        if status != LpStatus.OPTIMAL or infeasibility > FEASIBILITY_TOL:
            return LpSolution(
                status=LpStatus.INFEASIBLE,
                x_star=np.full(n, np.nan),
                z_lp=math.inf,
                iterations=simplex.iterations,
                form=form,
            )
        simplex.drive_out(is_artificial, structural)

    cost = np.zeros(structural + n_art)
    cost[:n] = instance.cost
    status = simplex.run(cost, ~is_artificial)
    if status == LpStatus.UNBOUNDED:
        return LpSolution(
            status=LpStatus.UNBOUNDED,
            x_star=np.full(n, np.nan),
            z_lp=-math.inf,
            iterations=simplex.iterations,
            form=form,
        )

    z = np.zeros(structural + n_art)
    z[simplex.basis] = simplex.xB
    z[np.abs(z) < 1e-12] = 0.0
    x_star = z[:n] + form.lower
    duals = (simplex.Binv.T @ cost[simplex.basis]) * signs

    tableau_rows: List[TableauRow] = []
    integer_mask = instance.integer_mask
    for pos, col in enumerate(simplex.basis):
        if col >= n or not integer_mask[col] or is_integral(x_star[col]):
            continue
        coefficients = simplex.Binv[pos] @ M[:, :structural]
        coefficients[np.abs(coefficients) < 1e-12] = 0.0
        tableau_rows.append(TableauRow(variable=col, coefficients=coefficients, rhs=float(z[col])))
    tableau_rows.sort(key=lambda row: row.variable)

    return LpSolution(
        status=LpStatus.OPTIMAL,
        x_star=x_star,
        z_lp=float(instance.cost @ x_star),
        basic_columns=tuple(simplex.basis),
        tableau_rows=tableau_rows,
        duals=duals[:form.m],
        iterations=simplex.iterations,
        form=form,
    )
