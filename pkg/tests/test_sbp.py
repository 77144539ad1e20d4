"""
Tests for the score-based policy.
"""

import numpy as np
import pytest

from HierarchicalCutSelector.exceptions import ConfigError
from HierarchicalCutSelector.policies.hem import HemParams
from HierarchicalCutSelector.policies.sbp import SbpParams, SbpSelector, sbp_scores, sbp_select


class TestSbpParams:

    def test_vector_round_trip(self):
        params = SbpParams.initialize(np.random.default_rng(0), hidden_size=4)
        vector = params.to_vector()
        rebuilt = params.with_vector(vector)
        for name, value in params.weights.items():
            assert np.array_equal(rebuilt.weights[name], value)
        assert vector.size == sum(v.size for v in params.weights.values())

    def test_with_vector_copies(self):
        params = SbpParams.initialize(np.random.default_rng(0), hidden_size=4)
        vector = params.to_vector()
        rebuilt = params.with_vector(vector)
        vector[:] = 0.0
        assert np.any(rebuilt.to_vector() != 0.0)

    def test_checkpoint(self, tmp_path):
        params = SbpParams.initialize(np.random.default_rng(1), hidden_size=4, ratio=0.3)
        path = tmp_path / 'sbp.json'
        params.save(path)
        loaded = SbpParams.load(path)
        assert loaded.ratio == 0.3
        assert loaded.hidden_size == 4
        assert np.allclose(loaded.to_vector(), params.to_vector())

    def test_wrong_checkpoint_kind(self, tmp_path):
        path = tmp_path / 'hem.json'
        HemParams.initialize(np.random.default_rng(0), hidden_size=2).save(path)
        with pytest.raises(ConfigError):
            SbpParams.load(path)


class TestSbpSelection:

    def test_zero_weights_fall_back_to_id_order(self, random_state):
        params = SbpParams.zeros(hidden_size=4, ratio=0.4)
        assert np.allclose(sbp_scores(params, random_state), 0.0)
        # ids are (4, 0, 3, 1, 2): positions of ids 0 and 1
        assert sbp_select(params, random_state) == [1, 3]

    def test_selects_top_scores(self, random_state):
        params = SbpParams.initialize(np.random.default_rng(2), hidden_size=4, ratio=0.6)
        scores = sbp_scores(params, random_state)
        picked = SbpSelector(params).select(random_state, [], None)
        assert len(picked) == 3
        assert min(scores[picked]) >= max(np.delete(scores, picked))

    def test_empty_pool(self, random_state):
        params = SbpParams.zeros(hidden_size=4)
        assert sbp_select(params, random_state.take([])) == []
