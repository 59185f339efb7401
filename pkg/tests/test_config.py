"""Environment configuration and YAML run configs."""
import pytest

from config import DEFAULT_RUN_CONFIG, RUN_CONFIG_SECTIONS, TestingConfig, get_config, load_run_config
from exceptions import ConfigurationError
from experiment.trainer import TrainConfig
from nets.model import ModelConfig


class TestEnvironment:
    def test_testing_environment_selected(self):
        config = get_config()
        assert isinstance(config, TestingConfig)
        assert config.TESTING
        assert config.DB_URL == 'sqlite://'

    def test_other_environments(self, monkeypatch):
        monkeypatch.setenv('TIMING_ENV', 'production')
        assert not get_config().DEBUG
        monkeypatch.setenv('TIMING_ENV', 'anything-else')
        assert get_config().DEBUG and not get_config().TESTING


class TestRunConfig:
    def test_default_file_has_every_section(self):
        settings = load_run_config()
        assert tuple(settings) == RUN_CONFIG_SECTIONS
        assert settings['generator']['target_instances'] == 11665
        assert settings['sweep']['bins'] == [8, 12, 24, 48, 96, 288]

    def test_defaults_build_valid_configs(self):
        settings = load_run_config(DEFAULT_RUN_CONFIG)
        model = ModelConfig.from_dict(settings['model'])
        train = TrainConfig.from_dict(settings['train'])
        assert (model.embed_dim, model.num_heads, model.ff_dim, model.hidden_dim) == (50, 2, 200, 100)
        assert (train.batch_size, train.learning_rate, train.patience) == (64, 1e-4, 20)

    def test_overrides_win_and_none_is_ignored(self):
        settings = load_run_config(overrides={'train': {'max_epochs': 3, 'patience': None}})
        assert settings['train']['max_epochs'] == 3
        assert settings['train']['patience'] == 20

    def test_partial_file(self, tmp_path):
        path = tmp_path / 'run.yaml'
        path.write_text('model:\n  num_bins: 24\n')
        settings = load_run_config(path)
        assert settings['model'] == {'num_bins': 24}
        assert settings['generator'] == {}

    def test_unknown_section(self, tmp_path):
        path = tmp_path / 'run.yaml'
        path.write_text('optimizer:\n  lr: 1\n')
        with pytest.raises(ConfigurationError) as info:
            load_run_config(path)
        assert info.value.key == 'optimizer'
        with pytest.raises(ConfigurationError):
            load_run_config(overrides={'optimizer': {'lr': 1}})

    def test_missing_or_malformed_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_run_config(tmp_path / 'absent.yaml')
        bad = tmp_path / 'bad.yaml'
        bad.write_text('- just\n- a list\n')
        with pytest.raises(ConfigurationError):
            load_run_config(bad)

    def test_unknown_model_key(self):
        with pytest.raises(ConfigurationError):
            ModelConfig.from_dict({'depth': 3})
