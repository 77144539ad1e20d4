"""
Tests for the PCA projection of selected cuts and the hull markers.
"""

import csv

import numpy as np
import pytest

from HierarchicalCutSelector.analysis import convex_hull_flags, export_pca_csv, pca_project, project_selections
from HierarchicalCutSelector.exceptions import DegenerateState


class TestPca:

    def test_two_rows_lie_on_first_axis(self):
        projection = pca_project(np.array([[1.0, 2.0, 3.0], [3.0, 2.0, -1.0]]))
        assert projection.coords[:, 1] == pytest.approx([0.0, 0.0], abs=1e-9)
        assert projection.coords[0, 0] == pytest.approx(-projection.coords[1, 0])
        assert not projection.degenerate

    def test_identical_rows_are_degenerate(self):
        projection = pca_project(np.ones((4, 3)))
        assert projection.degenerate
        assert np.array_equal(projection.coords, np.zeros((4, 2)))

    def test_needs_two_rows(self):
        with pytest.raises(DegenerateState):
            pca_project(np.ones((1, 3)))

    def test_reconstruction_error_is_trailing_variance(self):
        X = np.random.default_rng(0).normal(size=(30, 5))
        projection = pca_project(X)
        assert projection.reconstruction_error(X) == pytest.approx(projection.eigenvalues[2:].sum())
        assert np.all(np.diff(projection.eigenvalues) <= 1e-12)

    def test_sign_convention(self):
        projection = pca_project(np.random.default_rng(1).normal(size=(20, 4)))
        for column in projection.components.T:
            assert column[np.argmax(np.abs(column))] > 0.0


class TestConvexHull:

    def test_square_with_center(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
        assert convex_hull_flags(points).tolist() == [True, True, True, True, False]

    def test_collinear(self):
        points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        assert convex_hull_flags(points).tolist() == [True, False, True]

    def test_tiny_sets(self):
        assert convex_hull_flags(np.array([[0.0, 0.0], [1.0, 0.0]])).tolist() == [True, True]
        assert convex_hull_flags(np.array([[2.0, 3.0]])).tolist() == [False]


class TestExport:

    def test_project_and_export(self, tmp_path):
        rng = np.random.default_rng(2)
        selections = {'nv': rng.normal(size=(6, 4)), 'hem': rng.normal(size=(5, 4)), 'nocuts': np.zeros((0, 4))}
        projection, labels, on_hull = project_selections(selections)
        assert labels == ['nv'] * 6 + ['hem'] * 5
        assert on_hull.shape == (11,)
        assert on_hull[:6].sum() >= 3

        paths = export_pca_csv(tmp_path / 'pca', projection, labels, on_hull)
        with open(paths['points'], newline='') as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ['method', 'index', 'x', 'y', 'on_hull', 'degenerate']
        assert len(rows) == 12
        with open(paths['eigenvalues'], newline='') as handle:
            assert next(csv.reader(handle)) == ['component', 'eigenvalue']
