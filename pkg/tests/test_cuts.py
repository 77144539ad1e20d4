"""
Tests for Gomory cut generation: validity, violation, ids and deduplication.
"""

import itertools

import numpy as np
import pytest

from HierarchicalCutSelector.models.dtos import LpStatus
from HierarchicalCutSelector.solver.cuts import Cut, deduplicate, generate_cuts
from HierarchicalCutSelector.solver.lp import MilpInstance, Row, add_rows, solve_lp


def _random_integer_instance(seed, n=3, m=3, upper=3):
    rng = np.random.default_rng(seed)
    rows = tuple(
        Row(tuple(range(n)), tuple(float(v) for v in rng.integers(-2, 6, size=n)), float(rng.integers(2, 12)))
        for _ in range(m)
    )
    return MilpInstance(
        name=f'rand{seed}',
        c=tuple(float(v) for v in rng.integers(-6, 2, size=n)),
        rows=rows,
        integer_set=tuple(range(n)),
        lower=(0.0,) * n,
        upper=(float(upper),) * n,
    )


def _integer_points(instance):
    ranges = [range(int(lo), int(hi) + 1) for lo, hi in zip(instance.lower, instance.upper)]
    points = [np.array(p, dtype=float) for p in itertools.product(*ranges)]
    return [x for x in points if instance.is_feasible(x)]


def _assert_valid(cuts, points):
    for cut in cuts:
        for x in points:
            assert cut.activity(x) <= cut.beta + 1e-6, f"cut {cut.id} removes feasible point {x}"


# ---------------------------------------------------------------------------
# Validity
# ---------------------------------------------------------------------------

class TestCutValidity:

    def test_half_instance_cut(self, half_instance):
        lp = solve_lp(half_instance)
        cuts = generate_cuts(half_instance, lp)
        assert cuts
        _assert_valid(cuts, _integer_points(half_instance))
        for cut in cuts:
            assert cut.violation(lp.x_star) > 1e-6

    def test_random_instances_first_round(self):
        total = 0
        for seed in range(10):
            inst = _random_integer_instance(seed)
            lp = solve_lp(inst)
            if lp.status != LpStatus.OPTIMAL:
                continue
            cuts = generate_cuts(inst, lp)
            total += len(cuts)
            _assert_valid(cuts, _integer_points(inst))
            for cut in cuts:
                assert cut.violation(lp.x_star) > 1e-6
        assert total > 0

    def test_second_round_on_fractional_rows(self):
        """Cuts separated after earlier cuts were appended stay valid."""
        for seed in range(10):
            inst = _random_integer_instance(seed)
            lp = solve_lp(inst)
            if lp.status != LpStatus.OPTIMAL:
                continue
            first = generate_cuts(inst, lp)
            if not first:
                continue
            extended = add_rows(inst, first)
            lp2 = solve_lp(extended)
            if lp2.status != LpStatus.OPTIMAL:
                continue
            second = generate_cuts(extended, lp2, first_id=len(first), separation_round=1)
            _assert_valid(second, _integer_points(inst))
            assert all(c.origin[1] == 1 for c in second)

    def test_integral_optimum_gives_no_cuts(self):
        inst = MilpInstance(
            name='integral', c=(-1.0, -1.0), rows=(Row((0, 1), (1.0, 1.0), 1.0),),
            integer_set=(0, 1), lower=(0.0, 0.0), upper=(1.0, 1.0),
        )
        # every vertex of this polytope is integral
        lp = solve_lp(inst)
        assert lp.fractional_variables() == []
        assert generate_cuts(inst, lp) == []


# ---------------------------------------------------------------------------
# Ids and duplicates
# ---------------------------------------------------------------------------

class TestCutIds:

    def test_ids_are_consecutive_from_first_id(self, small_knapsack):
        lp = solve_lp(small_knapsack)
        cuts = generate_cuts(small_knapsack, lp, first_id=10)
        assert [c.id for c in cuts] == list(range(10, 10 + len(cuts)))

    def test_deduplicate_keeps_lowest_id(self):
        a = Cut((0, 1), (1.0, 1.0), 1.0, (0, 0), 3)
        b = Cut((0, 1), (2.0, 2.0), 2.0, (1, 0), 1)
        c = Cut((0,), (1.0,), 0.0, (0, 0), 2)
        kept = deduplicate([a, b, c], n=2)
        assert [k.id for k in kept] == [1, 2]

    def test_deduplicate_drops_zero_cut(self):
        zero = Cut((0,), (0.0,), 1.0, (0, 0), 0)
        assert deduplicate([zero], n=1) == []

    def test_scaled_cut_describes_same_halfspace(self):
        cut = Cut((0, 1), (1.0, -2.0), 3.0, (0, 0), 0)
        doubled = cut.scaled(2.0)
        x = np.array([4.0, 1.0])
        assert doubled.violation(x) == pytest.approx(2.0 * cut.violation(x))
