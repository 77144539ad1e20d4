"""
Tests for evolution-strategies training of the score-based policy.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from HierarchicalCutSelector.models.dtos import EsConfig, RewardKind
from HierarchicalCutSelector.policies.sbp import SbpParams
from HierarchicalCutSelector.training.es import centered_ranks, es_train_sbp, pool_fitness


class TestCenteredRanks:

    def test_distinct_values(self):
        assert centered_ranks(np.array([3.0, 1.0, 2.0])) == pytest.approx([0.5, -0.5, 0.0])

    def test_ties_share_rank(self):
        assert centered_ranks(np.array([1.0, 1.0, 2.0])) == pytest.approx([-0.25, -0.25, 0.5])

    def test_too_few_values(self):
        assert np.array_equal(centered_ranks(np.array([4.0])), np.zeros(1))
        assert centered_ranks(np.array([])).size == 0


class TestEsTraining:

    def test_population_must_be_even(self):
        with pytest.raises(ValidationError):
            EsConfig(population=5)

    def test_constant_fitness_leaves_weights(self):
        config = EsConfig(population=6, sigma=0.1, step_size=0.5, generations=3, hidden_size=2, seed=1)
        start = SbpParams.initialize(np.random.default_rng(0), hidden_size=2)
        seen = []
        result = es_train_sbp(config, lambda params: 1.0, start, evaluate=lambda g, p: seen.append(p))
        assert result.history == [1.0] * 4
        for params in seen:
            assert np.array_equal(params.to_vector(), start.to_vector())

    def test_step_follows_linear_fitness(self):
        start = SbpParams.zeros(hidden_size=1)
        slope = np.random.default_rng(5).normal(size=start.to_vector().size)
        config = EsConfig(population=200, sigma=0.1, step_size=0.1, generations=1, hidden_size=1, seed=2)
        seen = []
        es_train_sbp(config, lambda params: float(params.to_vector() @ slope), start,
                     evaluate=lambda g, p: seen.append(p))
        step = seen[0].to_vector() - start.to_vector()
        cosine = step @ slope / (np.linalg.norm(step) * np.linalg.norm(slope))
        assert cosine > 0.5

    def test_returns_best_seen(self):
        config = EsConfig(population=4, sigma=0.1, step_size=0.1, generations=5, hidden_size=1, seed=3)
        calls = []

        def fitness(params):
            value = -float(np.sum((params.to_vector() - 1.0) ** 2))
            calls.append(value)
            return value

        generations = []
        result = es_train_sbp(config, fitness, evaluate=lambda g, p: generations.append(g))
        assert generations == [0, 1, 2, 3, 4]
        assert len(result.history) == 6
        assert result.best_fitness == max(calls)
        assert fitness(result.params) == pytest.approx(result.best_fitness)

    def test_pool_fitness(self, half_instance, solve_config):
        fitness = pool_fitness([half_instance], solve_config, RewardKind.NEG_SOLVE_TIME, scale=2.0)
        value = fitness(SbpParams.initialize(np.random.default_rng(0), hidden_size=2))
        assert math.isfinite(value)
        assert value <= 0.0
