import json

import pytest

from src.core.context import build_context
from src.core.errors import ConfigurationError
from src.services.config_service import (
    RunConfig,
    get_application_config,
    get_config_path,
    get_runtime_config,
    load_run_config,
    resolve_thread_count,
    save_run_config,
)
from src.services.correlation import PyramidConfig


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.pyramid == PyramidConfig()
        assert config.t == 0.5 and config.seed == 42 and config.precision == "float32"

    def test_json_round_trip(self, small_config, tmp_path):
        path = save_run_config(small_config, tmp_path / "run.json")
        assert load_run_config(path) == small_config

    def test_radii_alone_set_levels(self):
        config = RunConfig.from_dict({"pyramid": {"radii": [2, 1]}})
        assert config.pyramid.levels == 2
        assert config.pyramid.channels_per_direction == 25 + 9

    def test_partial_widths(self):
        config = RunConfig.from_dict({"widths": {"trunk": 16, "context": [8, 8, 8]}})
        assert config.widths.trunk == 16
        assert config.widths.context == (8, 8, 8)
        assert config.widths.hidden == 64

    @pytest.mark.parametrize(
        "doc",
        [
            {"bogus": 1},
            {"pyramid": {"levels": 2}},
            {"pyramid": {"radii": "3"}},
            {"widths": {"trunk": 0}},
            {"widths": {"nope": 1}},
            {"loss": {"lambda1": -0.5}},
            {"t": 1.5},
            {"seed": -1},
            {"seed": 1 << 64},
            {"seed": True},
            {"precision": "float16"},
            [],
        ],
    )
    def test_invalid_documents(self, doc):
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict(doc)

    def test_max_seed_allowed(self):
        assert RunConfig(seed=(1 << 64) - 1).seed == (1 << 64) - 1

    def test_bad_json(self):
        with pytest.raises(ConfigurationError, match="not valid JSON"):
            RunConfig.from_json("{pyramid")

    def test_no_path_gives_defaults(self):
        assert load_run_config(None) == RunConfig()


class TestSettingsToml:
    def test_default_file_created(self, data_dir):
        runtime, err = get_runtime_config()
        assert err is None
        assert runtime.threads == 1 and runtime.log_level == "INFO"
        assert get_config_path() == data_dir / "settings" / "config.toml"
        assert get_config_path().exists()

    def test_values_read_from_file(self):
        get_config_path().write_text(
            '[APPLICATION]\nenvironment = "development"\n[RUNTIME]\nthreads = 3\nlog_level = "debug"\n',
            encoding="utf-8",
        )
        runtime, _ = get_runtime_config()
        app, _ = get_application_config()
        assert runtime.threads == 3 and runtime.log_level == "DEBUG"
        assert app.environment == "development"

    def test_invalid_values_fall_back(self):
        get_config_path().write_text('[RUNTIME]\nthreads = "many"\nlog_level = "LOUD"\n', encoding="utf-8")
        runtime, _ = get_runtime_config()
        assert runtime.threads == 1 and runtime.log_level == "INFO"

    def test_broken_toml_reports_error(self):
        get_config_path().write_text("[RUNTIME\n", encoding="utf-8")
        runtime, err = get_runtime_config()
        assert err and runtime.threads == 1

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("DQBC_THREADS", "4")
        monkeypatch.setenv("DQBC_ENV", "Development")
        assert get_runtime_config()[0].threads == 4
        assert get_application_config()[0].environment == "Development"

    def test_thread_precedence(self, monkeypatch):
        get_config_path().write_text("[RUNTIME]\nthreads = 2\n", encoding="utf-8")
        assert resolve_thread_count(None) == 2
        monkeypatch.setenv("DQBC_THREADS", "5")
        assert resolve_thread_count(None) == 5
        assert resolve_thread_count(7) == 7
        assert resolve_thread_count(0) == 1


class TestBuildContext:
    def test_seed_override_and_weights(self, small_config, tmp_path):
        path = save_run_config(small_config, tmp_path / "run.json")
        ctx = build_context(config_path=path, weights_path=tmp_path / "w.dqbw", seed=99, threads=2)
        assert ctx.run.seed == 99
        assert ctx.run.pyramid == small_config.pyramid
        assert ctx.threads == 2
        assert ctx.weights_path == tmp_path / "w.dqbw"
        assert ctx.env_lower == "production"

    def test_bad_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"pyramid": {"levels": 0, "radii": []}}), encoding="utf-8")
        with pytest.raises(ConfigurationError):
            build_context(config_path=path)
