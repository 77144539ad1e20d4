"""
Cut features: the thirteen-number description of each candidate cut that
every learned and rule-based selector consumes.
"""

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import ZeroNormCut
from HierarchicalCutSelector.solver.cuts import Cut
from HierarchicalCutSelector.solver.lp import LpSolution, MilpInstance

BETA_GUARD = 1e-9


@dataclass(frozen=True)
class CutFeatures:
    coef_mean: float
    coef_max: float
    coef_min: float
    coef_std: float
    obj_mean: float
    obj_max: float
    obj_min: float
    obj_std: float
    parallelism: float
    efficacy: float
    support: float
    integral_support: float
    normalized_violation: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


FEATURE_NAMES: Tuple[str, ...] = tuple(f.name for f in fields(CutFeatures))
NUM_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class CutSelState:
    """
    Selector input: one feature row per candidate cut, in cut-id order.

    ``matrix`` has shape ``(N, 13)`` and ``cut_ids`` the matching ids.
    """
    matrix: np.ndarray
    cut_ids: Tuple[int, ...] = ()

    @property
    def N(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def features(self) -> List[CutFeatures]:
        return [CutFeatures(*row) for row in self.matrix]

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, FEATURE_NAMES.index(name)]

    def take(self, order: Sequence[int]) -> 'CutSelState':
        order = list(order)
        return CutSelState(self.matrix[order], tuple(self.cut_ids[i] for i in order))

    def standardized(self) -> 'CutSelState':
        """Per-pool z-score of every column; constant columns become zero."""
        if self.N == 0:
            return self
        std = self.matrix.std(axis=0)
        centered = self.matrix - self.matrix.mean(axis=0)
        scaled = np.divide(centered, std, out=np.zeros_like(centered), where=std > 0)
        return CutSelState(scaled, self.cut_ids)

    @classmethod
    def from_features(cls, rows: Sequence[CutFeatures], cut_ids: Sequence[int] = ()) -> 'CutSelState':
        matrix = np.array([r.as_array() for r in rows], dtype=float).reshape(len(rows), NUM_FEATURES)
        return cls(matrix, tuple(cut_ids) or tuple(range(len(rows))))


def _stats(values: np.ndarray) -> Tuple[float, float, float, float]:
    if values.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    return float(values.mean()), float(values.max()), float(values.min()), float(values.std())


def cut_features(instance: MilpInstance, x_star: np.ndarray, cut: Cut) -> CutFeatures:
    """
    Describe one cut relative to the current LP optimum.

    Objective statistics are taken over the cut's support only.

    Raises:
        ZeroNormCut: when the cut has no nonzero coefficient.
    """
    values = np.array(cut.values, dtype=float)
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise ZeroNormCut(f"Cut {cut.id} has an all-zero coefficient vector")

    support = np.array(cut.indices, dtype=int)
    cost = instance.cost
    cost_norm = float(np.linalg.norm(cost))
    parallelism = float(cost[support] @ values) / (cost_norm * norm) if cost_norm > 0 else 0.0

    residual = cut.violation(x_star)
    denominator = abs(cut.beta) if abs(cut.beta) >= BETA_GUARD else 1.0

    coef_mean, coef_max, coef_min, coef_std = _stats(values)
    obj_mean, obj_max, obj_min, obj_std = _stats(cost[support])
    return CutFeatures(
        coef_mean=coef_mean,
        coef_max=coef_max,
        coef_min=coef_min,
        coef_std=coef_std,
        obj_mean=obj_mean,
        obj_max=obj_max,
        obj_min=obj_min,
        obj_std=obj_std,
        parallelism=float(np.clip(parallelism, -1.0, 1.0)),
        efficacy=abs(residual) / norm,
        support=len(support) / instance.n,
        integral_support=float(np.count_nonzero(instance.integer_mask[support])) / len(support),
        normalized_violation=max(0.0, residual / denominator),
    )


def featurize(
    instance: MilpInstance,
    lp: LpSolution,
    cuts: Sequence[Cut],
    standardize: bool = False,
) -> CutSelState:
    """
    Encode the candidate pool as a selector state.

    Args:
        instance: The model the cuts were generated for.
        lp: Its optimal LP solution.
        cuts: Candidate cuts, already in id order.
        standardize: Apply the per-pool z-score (off by default).
    """
    rows = [cut_features(instance, lp.x_star, cut) for cut in cuts]
    state = CutSelState.from_features(rows, [cut.id for cut in cuts])
    return state.standardized() if standardize else state


def export_features_csv(state: CutSelState, path: Path) -> None:
    """Write one row per cut with a fixed thirteen-column header."""
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['cut_id', *FEATURE_NAMES])
        for cut_id, row in zip(state.cut_ids, state.matrix):
            writer.writerow([cut_id, *(repr(float(v)) for v in row)])


def load_features_csv(path: Path) -> CutSelState:
    with open(path, newline='') as handle:
        reader = csv.DictReader(handle)
        ids, rows = [], []
        for record in reader:
            ids.append(int(record['cut_id']))
            rows.append([float(record[name]) for name in FEATURE_NAMES])
    matrix = np.array(rows, dtype=float).reshape(len(rows), NUM_FEATURES)
    return CutSelState(matrix, tuple(ids))
