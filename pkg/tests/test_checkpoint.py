"""
Tests for versioned parameter checkpoints.
"""

import json

import numpy as np
import pytest

from HierarchicalCutSelector.exceptions import ConfigError, MissingArtifact, MissingCheckpoint
from HierarchicalCutSelector.neural.checkpoint import SCHEMA_VERSION, load_checkpoint, save_checkpoint


@pytest.fixture
def groups():
    rng = np.random.default_rng(4)
    return {'theta1': {'W': rng.normal(size=(2, 3)), 'b': rng.normal(size=3)}, 'theta2': {'s': np.array(1.5)}}


class TestCheckpoint:

    def test_round_trip(self, tmp_path, groups):
        path = tmp_path / 'nested' / 'model.json'
        save_checkpoint(path, 'hem', groups, {'epoch': 3})
        kind, loaded, meta = load_checkpoint(path, 'hem')
        assert kind == 'hem'
        assert meta == {'epoch': 3}
        for group, tensors in groups.items():
            for name, value in tensors.items():
                assert loaded[group][name].shape == value.shape
                assert np.allclose(loaded[group][name], value, rtol=1e-12, atol=0.0)

    def test_document_layout(self, tmp_path, groups):
        path = tmp_path / 'model.json'
        save_checkpoint(path, 'hem', groups)
        doc = json.loads(path.read_text())
        assert doc['schema_version'] == SCHEMA_VERSION
        assert doc['groups']['theta1']['W']['shape'] == [2, 3]

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingCheckpoint):
            load_checkpoint(tmp_path / 'absent.json')
        assert issubclass(MissingCheckpoint, MissingArtifact)

    def test_wrong_kind(self, tmp_path, groups):
        path = tmp_path / 'model.json'
        save_checkpoint(path, 'sbp', groups)
        with pytest.raises(ConfigError):
            load_checkpoint(path, 'hem')

    def test_newer_schema(self, tmp_path):
        path = tmp_path / 'future.json'
        path.write_text(json.dumps({'schema_version': SCHEMA_VERSION + 1, 'kind': 'hem', 'groups': {}}))
        with pytest.raises(ConfigError):
            load_checkpoint(path)

    def test_malformed(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text(json.dumps({'kind': 'hem', 'groups': {'g': {'w': {'shape': [2], 'values': [1.0]}}}}))
        with pytest.raises(ConfigError):
            load_checkpoint(path)
