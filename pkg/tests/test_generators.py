"""
Tests for the synthetic instance families and corpus splits.
"""

import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from HierarchicalCutSelector.exceptions import MissingArtifact
from HierarchicalCutSelector.generators import (
    barabasi_albert,
    generate,
    hold_out,
    independent_set,
    independent_set_from_edges,
    load_split,
    multiple_knapsack,
    set_covering,
    split_names,
    weights_and_values,
    write_split,
)
from HierarchicalCutSelector.models.dtos import Family, GenSpec, SolveStatus
from HierarchicalCutSelector.policies.rules import NoCuts, NvSelector
from HierarchicalCutSelector.solver.search import branch_and_cut


def _knapsack_optimum(instance, n_items, n_knapsacks):
    """Enumerate every item placement: none or one of the knapsacks."""
    best = float('inf')
    for placement in itertools.product(range(n_knapsacks + 1), repeat=n_items):
        x = np.zeros(instance.n)
        for item, slot in enumerate(placement):
            if slot:
                x[item * n_knapsacks + slot - 1] = 1.0
        if instance.is_feasible(x):
            best = min(best, float(instance.cost @ x))
    return best


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

class TestSetCovering:

    @pytest.fixture
    def instance(self):
        return set_covering(5, 8, 0.3, np.random.default_rng(0))

    def test_structure(self, instance):
        A = instance.A
        assert A.shape == (5, 8)
        assert np.all((A == 0.0) | (A == -1.0))
        assert np.all(instance.b == -1.0)
        assert np.all((A != 0.0).sum(axis=1) >= 1)
        assert np.all((A != 0.0).sum(axis=0) == 2)
        assert np.all((instance.cost >= 1) & (instance.cost <= 100))

    def test_matches_enumeration(self, instance, solve_config, enumerate_optimum):
        expected, _ = enumerate_optimum(instance)
        for selector in (NoCuts(), NvSelector()):
            stats = branch_and_cut(instance, selector, solve_config)
            assert stats.status == SolveStatus.OPTIMAL_PROVEN
            assert stats.primal_bound == pytest.approx(expected)


class TestIndependentSet:

    def test_triangle(self, solve_config):
        instance = independent_set_from_edges(3, [(0, 1), (1, 2), (2, 0), (1, 1)])
        assert len(instance.rows) == 3
        stats = branch_and_cut(instance, NvSelector(), solve_config)
        assert stats.primal_bound == pytest.approx(-1.0)

    def test_barabasi_albert_edge_count(self):
        edges = barabasi_albert(8, 2, np.random.default_rng(0))
        assert len(edges) == 2 * (8 - 2)
        assert all(u < v for u, v in edges)
        assert len(set(edges)) == len(edges)

    @pytest.mark.parametrize('affinity', [0, 8, 9])
    def test_invalid_affinity(self, affinity):
        with pytest.raises(ValueError):
            barabasi_albert(8, affinity, np.random.default_rng(0))

    def test_matches_enumeration(self, solve_config, enumerate_optimum):
        instance = independent_set(9, 2, np.random.default_rng(4))
        stats = branch_and_cut(instance, NvSelector(), solve_config)
        assert stats.primal_bound == pytest.approx(enumerate_optimum(instance)[0])


class TestMultipleKnapsack:

    def test_weights_and_values(self):
        weights, values = weights_and_values(200, np.random.default_rng(1))
        assert np.all((weights >= 10) & (weights < 20))
        assert np.all(values >= np.maximum(weights - 10, 1))
        assert np.all(values < weights + 10)

    def test_layout(self):
        instance = multiple_knapsack(6, 3, np.random.default_rng(2))
        assert instance.n == 18
        assert len(instance.rows) == 3 + 6
        # capacity rows come first and index variables i * K + k
        assert instance.rows[1].indices == tuple(i * 3 + 1 for i in range(6))
        assert instance.rows[3].indices == (0, 1, 2)
        assert np.all(instance.cost < 0)

    def test_matches_enumeration(self, solve_config):
        instance = multiple_knapsack(6, 2, np.random.default_rng(3))
        stats = branch_and_cut(instance, NvSelector(), solve_config)
        assert stats.status == SolveStatus.OPTIMAL_PROVEN
        assert stats.primal_bound == pytest.approx(_knapsack_optimum(instance, 6, 2))


# ---------------------------------------------------------------------------
# Corpora and splits
# ---------------------------------------------------------------------------

class TestCorpus:

    @pytest.fixture
    def spec(self):
        return GenSpec(family=Family.MAX_INDEPENDENT_SET, n_nodes=10, affinity=2, seed=5, count=5)

    def test_generation_is_deterministic(self, spec):
        first, second = generate(spec), generate(spec)
        assert [i.name for i in first] == [f'max_independent_set_5_{k:04d}' for k in range(5)]
        assert [i.rows for i in first] == [i.rows for i in second]

    @pytest.mark.parametrize('count, n_train', [(10, 8), (5, 4), (1, 0)])
    def test_split_sizes(self, count, n_train):
        names = [f'inst{k}' for k in range(count)]
        train, test = split_names(names, seed=0)
        assert len(train) == n_train
        assert sorted(train + test) == sorted(names)
        assert split_names(names, seed=0) == (train, test)

    @pytest.mark.parametrize('count, size, n_fit', [(4, 1, 3), (4, 0, 4), (3, 5, 1), (1, 1, 1)])
    def test_hold_out(self, spec, count, size, n_fit):
        pool = generate(spec.model_copy(update={'count': count}))
        fit, held = hold_out(pool, size)
        assert len(fit) == n_fit
        assert [i.name for i in fit + held] == [i.name for i in pool]
        assert not {i.name for i in fit} & {i.name for i in held}

    def test_write_and_load(self, spec, tmp_path):
        instances = generate(spec)
        manifest = write_split(instances, tmp_path, spec, 'testing')
        loaded, train, test = load_split(tmp_path / 'split.json')
        assert loaded == manifest
        assert [i.name for i in train] == manifest.train
        assert [i.name for i in test] == manifest.test
        by_name = {i.name: i for i in instances}
        assert all(by_name[i.name].rows == i.rows for i in train + test)

    def test_missing_split(self, tmp_path):
        with pytest.raises(MissingArtifact):
            load_split(tmp_path / 'split.json')

    def test_scaled_spec(self, spec):
        bigger = spec.scaled(2.0)
        assert bigger.n_nodes == 20
        assert bigger.affinity == spec.affinity
        assert spec.scaled(0.01).n_nodes == spec.affinity + 1

    def test_affinity_must_fit_graph(self):
        with pytest.raises(ValidationError):
            GenSpec(family=Family.MAX_INDEPENDENT_SET, n_nodes=4, affinity=4)
