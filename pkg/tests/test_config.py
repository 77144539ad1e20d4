"""
Tests for preset selection, overrides and the typed config views.
"""

import json

import pytest
from pydantic import ValidationError

from HierarchicalCutSelector import config
from HierarchicalCutSelector.exceptions import ConfigError
from HierarchicalCutSelector.models.dtos import ClockKind, Family, PolicyVariant, RewardKind


@pytest.fixture
def settings():
    return config.load_settings(config.get_config_class('testing'))


class TestPresets:

    def test_known_presets(self):
        assert config.get_config_class('paper') is config.PaperConfig
        assert config.get_config_class('TESTING').__name__ == 'TestingConfig'

    def test_unknown_preset_falls_back(self):
        assert config.get_config_class('nonsense') is config.DeskConfig

    def test_environment_preset(self, monkeypatch):
        monkeypatch.setenv('HCS_PRESET', 'paper')
        assert config.get_config_class() is config.PaperConfig

    def test_preset_name(self):
        assert config.preset_name(config.get_config_class('testing')) == 'testing'


class TestOverrides:

    def test_overrides_are_case_insensitive(self):
        settings = config.load_settings(config.DeskConfig, {'time_limit': 5.0, 'Node_Limit': 7})
        assert settings['TIME_LIMIT'] == 5.0
        assert settings['NODE_LIMIT'] == 7

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            config.load_settings(config.DeskConfig, {'NOT_A_SETTING': 1})

    def test_read_overrides(self, tmp_path):
        path = tmp_path / 'overrides.json'
        path.write_text(json.dumps({'epochs': 3}))
        assert config.read_overrides(path) == {'epochs': 3}
        assert config.read_overrides(None) == {}

    @pytest.mark.parametrize('content', ['{not json', '[1, 2]'])
    def test_bad_override_files(self, tmp_path, content):
        path = tmp_path / 'overrides.json'
        path.write_text(content)
        with pytest.raises(ConfigError):
            config.read_overrides(path)

    def test_missing_override_file(self, tmp_path):
        with pytest.raises(ConfigError):
            config.read_overrides(tmp_path / 'absent.json')

    def test_config_hash(self, settings):
        same = dict(reversed(list(settings.items())))
        assert config.config_hash(settings) == config.config_hash(same)
        assert len(config.config_hash(settings)) == 64
        assert config.config_hash(settings) != config.config_hash({**settings, 'EPOCHS': 99})

    def test_parse_lists(self):
        assert config.parse_ints('1, 2,3') == [1, 2, 3]
        assert config.parse_ints([4, '5']) == [4, 5]
        assert config.parse_floats('2,4.5') == [2.0, 4.5]


class TestTypedViews:

    def test_solve_config(self, settings):
        solve = config.solve_config(settings, seed=3)
        assert solve.clock == ClockKind.WORK
        assert solve.time_limit == 10.0
        assert solve.seed == 3

    def test_train_and_es_config(self, settings):
        train = config.train_config(settings, seed=1)
        assert train.reward == RewardKind.NEG_PD_INTEGRAL
        assert train.variant == PolicyVariant.HEM
        assert train.hidden_size == 4
        es = config.es_config(settings)
        assert es.population == 4

    def test_gen_spec(self, settings):
        spec = config.gen_spec(settings, Family.MULTIPLE_KNAPSACK, seed=2, count=3)
        assert (spec.n_items, spec.n_knapsacks, spec.count) == (5, 2, 3)

    def test_invalid_values(self, settings):
        with pytest.raises(ValidationError):
            config.solve_config({**settings, 'TIME_LIMIT': -1.0})
        with pytest.raises(ValidationError):
            config.train_config({**settings, 'REWARD': 'fastest'})
