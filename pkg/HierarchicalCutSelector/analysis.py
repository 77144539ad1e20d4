"""
Two-dimensional PCA of selected-cut features, with convex-hull markers.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import DegenerateState

logger = logging.getLogger(__name__)

VARIANCE_TOL = 1e-12
N_COMPONENTS = 2


@dataclass
class PcaProjection:
    coords: np.ndarray
    eigenvalues: np.ndarray
    components: np.ndarray
    mean: np.ndarray
    degenerate: bool

    def reconstruction_error(self, features: np.ndarray) -> float:
        """Mean squared residual of the 2-D reconstruction of *features*."""
        centered = np.asarray(features, dtype=float) - self.mean
        residual = centered - self.coords @ self.components.T
        return float((residual ** 2).sum() / len(centered))


def pca_project(features: np.ndarray, n_components: int = N_COMPONENTS) -> PcaProjection:
    """
    Project rows of *features* onto the leading principal components.

    The covariance is ``Xc' Xc / n``. Each component is signed so that its
    largest-magnitude entry is positive. When all rows coincide the
    coordinates are zeros and ``degenerate`` is set.

    Raises:
        DegenerateState: with fewer than two rows.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise DegenerateState("PCA needs at least two selected cuts")
    mean = X.mean(axis=0)
    centered = X - mean
    eigenvalues, vectors = np.linalg.eigh(centered.T @ centered / len(X))
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order]
    pivots = np.argmax(np.abs(vectors), axis=0)
    vectors = vectors * np.sign(vectors[pivots, np.arange(vectors.shape[1])])

    components = vectors[:, :n_components]
    degenerate = bool(eigenvalues.sum() <= VARIANCE_TOL)
    coords = np.zeros((len(X), n_components)) if degenerate else centered @ components
    if degenerate:
        logger.warning("Selected cuts are identical; PCA coordinates are zero")
    return PcaProjection(coords, eigenvalues, components, mean, degenerate)


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def convex_hull_flags(points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Mark the points that are vertices of the convex hull (monotone chain)."""
    points = np.asarray(points, dtype=float)
    flags = np.zeros(len(points), dtype=bool)
    order = sorted(range(len(points)), key=lambda i: (points[i, 0], points[i, 1]))
    unique: List[int] = []
    for i in order:
        if not unique or not np.allclose(points[i], points[unique[-1]], atol=tol):
            unique.append(i)
    if len(unique) <= 2:
        flags[unique] = len(unique) == 2
        return flags

    def chain(indices: Sequence[int]) -> List[int]:
        hull: List[int] = []
        for i in indices:
            while len(hull) >= 2 and _cross(points[hull[-2]], points[hull[-1]], points[i]) <= tol:
                hull.pop()
            hull.append(i)
        return hull

    lower, upper = chain(unique), chain(unique[::-1])
    flags[lower[:-1] + upper[:-1]] = True
    return flags


def project_selections(selections: Mapping[str, np.ndarray]) -> Tuple[PcaProjection, List[str], np.ndarray]:
    """
    Joint projection of the cuts each method selected.

    Returns the projection, the method label of every row, and per-row hull
    flags computed within each method's own point set.
    """
    labels: List[str] = []
    blocks = []
    for method, rows in selections.items():
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.size:
            blocks.append(rows)
            labels.extend([method] * len(rows))
    projection = pca_project(np.vstack(blocks) if blocks else np.zeros((0, 0)))
    label_array = np.array(labels)
    on_hull = np.zeros(len(labels), dtype=bool)
    for method in selections:
        mask = label_array == method
        if mask.any() and not projection.degenerate:
            on_hull[mask] = convex_hull_flags(projection.coords[mask])
    return projection, labels, on_hull


def export_pca_csv(
    out_dir: Path, projection: PcaProjection, labels: Sequence[str], on_hull: np.ndarray
) -> Dict[str, Path]:
    """Write ``pca_points.csv`` and ``pca_eigenvalues.csv`` under *out_dir*."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points_path, eig_path = out_dir / 'pca_points.csv', out_dir / 'pca_eigenvalues.csv'
    with open(points_path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['method', 'index', 'x', 'y', 'on_hull', 'degenerate'])
        for i, (label, (x, y)) in enumerate(zip(labels, projection.coords)):
            writer.writerow([label, i, repr(float(x)), repr(float(y)), int(on_hull[i]), int(projection.degenerate)])
    with open(eig_path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['component', 'eigenvalue'])
        for k, value in enumerate(projection.eigenvalues):
            writer.writerow([k, repr(float(value))])
    return {'points': points_path, 'eigenvalues': eig_path}
