"""
Tests for the Adam optimiser.
"""

import numpy as np
import pytest

from HierarchicalCutSelector.exceptions import ShapeMismatch
from HierarchicalCutSelector.neural.optim import Adam, adam_step


class TestAdam:

    def test_first_step_moves_by_learning_rate(self):
        params = {'w': np.array([1.0, -2.0])}
        updated = Adam(lr=0.1).step(params, {'w': np.array([0.5, -3.0])})
        assert updated['w'] == pytest.approx([0.9, -1.9], abs=1e-6)
        assert params['w'] == pytest.approx([1.0, -2.0])

    def test_missing_gradient_leaves_parameter(self):
        params = {'w': np.ones(2), 'frozen': np.full(3, 4.0)}
        updated = Adam(lr=0.1).step(params, {'w': np.ones(2)})
        assert updated['frozen'] is params['frozen']

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            Adam().step({'w': np.ones(2)}, {'w': np.ones(3)})

    def test_descends_a_quadratic(self):
        state = Adam(lr=0.05)
        params = {'w': np.array([3.0, -2.0])}
        for _ in range(500):
            params = adam_step(params, {'w': 2.0 * params['w']}, state)
        assert np.all(np.abs(params['w']) < 0.5)
        assert state.t == 500

    def test_moments_are_per_parameter(self):
        state = Adam(lr=0.1)
        state.step({'a': np.zeros(1), 'b': np.zeros(2)}, {'a': np.ones(1), 'b': -np.ones(2)})
        assert set(state.m) == {'a', 'b'}
        assert state.m['b'].shape == (2,)
