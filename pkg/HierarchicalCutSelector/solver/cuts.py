"""
Gomory cut generation from the LP tableau.

Every fractional basic integer variable yields one Gomory mixed-integer cut
read off its tableau row. Integer nonbasic columns (structural integers and
slacks of all-integer rows) get the rounded coefficient, continuous columns
the linear one, so the cut stays valid once earlier cuts (with fractional
data) have been appended as rows.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from HierarchicalCutSelector.models.dtos import LpStatus
from HierarchicalCutSelector.solver.lp import LpSolution, MilpInstance

FRACTIONALITY_MIN = 1e-4
COEF_ZERO = 1e-12
DUPLICATE_TOL = 1e-9


@dataclass(frozen=True)
class Cut:
    """
    A valid inequality ``alpha'x <= beta`` over the original variables.

    ``origin`` is ``(source variable, separation round)`` and ``id`` the
    generation counter, which is also the "original index" used when a
    selector discards its learned order.
    """
    indices: Tuple[int, ...]
    values: Tuple[float, ...]
    beta: float
    origin: Tuple[int, int]
    id: int

    def alpha(self, n: int) -> np.ndarray:
        dense = np.zeros(n)
        dense[list(self.indices)] = self.values
        return dense

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def activity(self, x: np.ndarray) -> float:
        return float(np.dot(self.values, np.asarray(x)[list(self.indices)]))

    def violation(self, x: np.ndarray) -> float:
        return self.activity(x) - self.beta

    def scaled(self, factor: float) -> 'Cut':
        return Cut(
            self.indices,
            tuple(v * factor for v in self.values),
            self.beta * factor,
            self.origin,
            self.id,
        )


def _gmi_coefficients(
    row: np.ndarray, f0: float, nonbasic: np.ndarray, column_integral: np.ndarray
) -> np.ndarray:
    pi = np.zeros_like(row)
    for k in np.nonzero(nonbasic & (np.abs(row) > COEF_ZERO))[0]:
        a = row[k]
        if column_integral[k]:
            fk = a - math.floor(a)
            if fk < COEF_ZERO or fk > 1.0 - COEF_ZERO:
                continue
            pi[k] = fk / f0 if fk <= f0 else (1.0 - fk) / (1.0 - f0)
        else:
            pi[k] = a / f0 if a >= 0 else -a / (1.0 - f0)
    return pi


def _is_duplicate(candidate: np.ndarray, kept: List[np.ndarray]) -> bool:
    return any(np.max(np.abs(candidate - other)) < DUPLICATE_TOL for other in kept)


def generate_cuts(
    instance: MilpInstance,
    lp: LpSolution,
    first_id: int = 0,
    separation_round: int = 0,
) -> List[Cut]:
    """
    Build the candidate pool for one separation round.

    Args:
        instance: The model whose relaxation produced *lp*.
        lp: An optimal LP solution of *instance*.
        first_id: Id given to the first returned cut; later cuts count up.
        separation_round: Recorded in each cut's origin.

    Returns:
        Deduplicated cuts, ordered by source variable, each violated by
        ``lp.x_star``. Empty when the LP optimum is integral.
    """
    if lp.status != LpStatus.OPTIMAL or lp.form is None or not lp.tableau_rows:
        return []

    form = lp.form
    n = form.n
    structural = n + form.p
    nonbasic = np.ones(structural, dtype=bool)
    nonbasic[[col for col in lp.basic_columns if col < structural]] = False

    cuts: List[Cut] = []
    kept: List[np.ndarray] = []
    for tab in lp.tableau_rows:
        value = lp.x_star[tab.variable]
        f0 = value - math.floor(value)
        if f0 < FRACTIONALITY_MIN or f0 > 1.0 - FRACTIONALITY_MIN:
            continue

        pi = _gmi_coefficients(tab.coefficients, f0, nonbasic, form.column_integral)
        pi_y, pi_s = pi[:n], pi[n:structural]

        # sum(pi * z) >= 1 with y = x - lower and s = h0 - G x, flipped to <=.
        alpha = form.G.T @ pi_s - pi_y
        beta = float(pi_s @ form.h0 - pi_y @ form.lower - 1.0)
        alpha[np.abs(alpha) < COEF_ZERO] = 0.0

        support = np.nonzero(alpha)[0]
        if support.size == 0:
            continue
        if float(alpha @ lp.x_star) - beta <= 1e-6:
            continue

        norm = float(np.linalg.norm(alpha))
        signature = np.append(alpha / norm, beta / norm)
        if _is_duplicate(signature, kept):
            continue
        kept.append(signature)

        cuts.append(Cut(
            indices=tuple(int(j) for j in support),
            values=tuple(float(v) for v in alpha[support]),
            beta=beta,
            origin=(tab.variable, separation_round),
            id=first_id + len(cuts),
        ))
    return cuts


def deduplicate(cuts: Sequence[Cut], n: int) -> List[Cut]:
    """Drop cuts whose normalised ``(alpha, beta)`` repeats an earlier id."""
    kept: List[np.ndarray] = []
    result: List[Cut] = []
    for cut in sorted(cuts, key=lambda c: c.id):
        alpha = cut.alpha(n)
        norm = float(np.linalg.norm(alpha))
        if norm == 0.0:
            continue
        signature = np.append(alpha / norm, cut.beta / norm)
        if not _is_duplicate(signature, kept):
            kept.append(signature)
            result.append(cut)
    return result
