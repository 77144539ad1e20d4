"""
Tests for the LP relaxation solver and the instance model.
"""

import itertools
import math

import numpy as np
import pytest

from HierarchicalCutSelector.exceptions import DimensionMismatch
from HierarchicalCutSelector.models.dtos import InstanceDTO, LpStatus
from HierarchicalCutSelector.solver.lp import MilpInstance, Row, add_rows, dump_instance, load_instance, solve_lp


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _dense_instance(A, b, c, upper=5.0, name='lp'):
    n = len(c)
    rows = tuple(Row(tuple(range(n)), tuple(float(v) for v in row), float(rhs)) for row, rhs in zip(A, b))
    return MilpInstance(name=name, c=tuple(float(v) for v in c), rows=rows, lower=(0.0,) * n, upper=(upper,) * n)


def _vertex_optimum(A, b, c, upper):
    """Minimum of c'x over the bounded polytope, by enumerating its vertices."""
    n = len(c)
    G = np.vstack([np.asarray(A, dtype=float), -np.eye(n), np.eye(n)])
    h = np.concatenate([np.asarray(b, dtype=float), np.zeros(n), np.full(n, upper)])
    best = math.inf
    for active in itertools.combinations(range(len(G)), n):
        sub = G[list(active)]
        if abs(np.linalg.det(sub)) < 1e-9:
            continue
        x = np.linalg.solve(sub, h[list(active)])
        if np.all(G @ x <= h + 1e-7):
            best = min(best, float(np.dot(c, x)))
    return best


# ---------------------------------------------------------------------------
# Known optima
# ---------------------------------------------------------------------------

class TestKnownOptima:

    def test_two_constraint_vertex(self):
        inst = _dense_instance([[1, 2], [3, 1]], [4, 6], [-1, -1], upper=math.inf)
        lp = solve_lp(inst)
        assert lp.status == LpStatus.OPTIMAL
        assert lp.x_star == pytest.approx([1.6, 1.2])
        assert lp.z_lp == pytest.approx(-2.8)

    def test_shifted_lower_bound(self):
        inst = MilpInstance(name='shift', c=(1.0,), rows=(), lower=(1.0,), upper=(3.0,))
        lp = solve_lp(inst)
        assert lp.status == LpStatus.OPTIMAL
        assert lp.x_star[0] == pytest.approx(1.0)

    def test_upper_bounds_respected(self):
        inst = _dense_instance([[1, 1]], [1.5], [-1, -1], upper=1.0)
        lp = solve_lp(inst)
        assert lp.z_lp == pytest.approx(-1.5)
        assert np.all(lp.x_star <= 1.0 + 1e-9)

    def test_infeasible(self):
        inst = MilpInstance(
            name='infeasible', c=(1.0,),
            rows=(Row((0,), (1.0,), 1.0), Row((0,), (-1.0,), -2.0)),
        )
        assert solve_lp(inst).status == LpStatus.INFEASIBLE

    def test_unbounded(self):
        inst = MilpInstance(name='unbounded', c=(-1.0, 0.0), rows=(Row((1,), (1.0,), 1.0),))
        lp = solve_lp(inst)
        assert lp.status == LpStatus.UNBOUNDED
        assert lp.z_lp == -math.inf

    def test_fractional_rows_reported_for_integer_variables(self, half_instance):
        lp = solve_lp(half_instance)
        assert lp.status == LpStatus.OPTIMAL
        assert lp.z_lp == pytest.approx(-1.5)
        assert lp.fractional_variables()
        for j in lp.fractional_variables():
            assert half_instance.integer_mask[j]


# ---------------------------------------------------------------------------
# Enumeration oracle
# ---------------------------------------------------------------------------

class TestAgainstVertexEnumeration:

    @pytest.mark.parametrize('seed', range(12))
    def test_random_bounded_lp(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 3, 4
        A = rng.integers(-3, 6, size=(m, n))
        b = rng.integers(1, 10, size=m)
        c = rng.integers(-5, 5, size=n)
        lp = solve_lp(_dense_instance(A, b, c))
        assert lp.status == LpStatus.OPTIMAL
        assert lp.z_lp == pytest.approx(_vertex_optimum(A, b, c, 5.0), abs=1e-6)
        assert np.all(A @ lp.x_star <= b + 1e-6)


# ---------------------------------------------------------------------------
# Instance model
# ---------------------------------------------------------------------------

class TestInstanceModel:

    def test_integer_bounds_rounded_inwards(self):
        inst = MilpInstance(name='round', c=(1.0,), rows=(), integer_set=(0,), lower=(0.5,), upper=(2.7,))
        assert inst.lower == (1.0,)
        assert inst.upper == (2.0,)

    def test_row_outside_variable_range(self):
        with pytest.raises(DimensionMismatch):
            MilpInstance(name='bad', c=(1.0,), rows=(Row((3,), (1.0,), 1.0),))

    def test_infinite_lower_bound_rejected(self):
        with pytest.raises(ValueError):
            MilpInstance(name='bad', c=(1.0,), rows=(), lower=(-math.inf,))

    def test_add_rows_keeps_original(self, half_instance):
        class _Cut:
            indices, values, beta, id = (0, 1), (1.0, 1.0), 1.0, 0

        extended = add_rows(half_instance, [_Cut()])
        assert extended.m == half_instance.m + 1
        assert half_instance.m == 1
        assert solve_lp(extended).z_lp == pytest.approx(-1.0)

    def test_add_rows_rejects_foreign_indices(self, half_instance):
        class _Cut:
            indices, values, beta, id = (5,), (1.0,), 1.0, 0

        with pytest.raises(DimensionMismatch):
            add_rows(half_instance, [_Cut()])

    def test_ge_and_eq_rows_normalised(self):
        dto = InstanceDTO.model_validate({
            'name': 'mixed', 'n': 2, 'm': 2, 'c': [1, 1],
            'rows': [
                {'coefs': [[0, 1], [1, 1]], 'rhs': 1, 'rel': '>='},
                {'coefs': [[0, 1]], 'rhs': 0.25, 'rel': '='},
            ],
            'bounds': [[0, 'inf'], [0, 'inf']],
        })
        inst = MilpInstance.from_dto(dto)
        assert inst.m == 3
        lp = solve_lp(inst)
        assert lp.x_star == pytest.approx([0.25, 0.75])

    def test_file_round_trip(self, tmp_path, small_knapsack):
        path = tmp_path / 'knap.json'
        path.write_text(dump_instance(small_knapsack))
        loaded = load_instance(path)
        assert loaded == small_knapsack

    def test_dimension_mismatch_in_file(self):
        with pytest.raises(ValueError):
            InstanceDTO.model_validate({'name': 'x', 'n': 2, 'm': 0, 'c': [1], 'rows': [], 'bounds': [[0, 1]]})
