"""
Unit tests for settings and run configuration files.
"""

from pathlib import Path

import pytest


class TestSettings:
    """Tests for the Settings singleton."""

    def test_defaults(self, isolated_settings):
        """Numerical defaults should match the documented tolerances."""
        from nsetas.config.settings import get_settings

        settings = get_settings()
        assert settings.output_dir == isolated_settings.resolve()
        assert settings.log_level == "INFO"
        assert settings.heavy_weight == 1e6
        assert settings.changepoint_weight == 1e-5
        assert settings.map_gtol == 1e-6
        assert settings.kahan_threshold == 10_000
        assert settings.debug_thinning is False

    def test_singleton(self):
        from nsetas.config.settings import get_settings

        assert get_settings() is get_settings()

    def test_reset_reloads_environment(self, monkeypatch):
        from nsetas.config.settings import get_settings, reset_settings

        first = get_settings()
        monkeypatch.setenv("NSETAS_MAP_MAX_ITER", "25")
        reset_settings()
        second = get_settings()
        assert second is not first
        assert second.map_max_iter == 25

    def test_env_overrides(self, env_settings):
        from nsetas.config.settings import get_settings

        settings = get_settings()
        assert settings.log_level == "DEBUG"
        assert settings.strict_mode is True
        assert settings.heavy_weight == 1e5
        assert settings.is_debug

    def test_log_level_normalized(self):
        from nsetas.config.settings import Settings

        assert Settings(log_level="warning").log_level == "WARNING"

    def test_invalid_log_level(self):
        from pydantic import ValidationError

        from nsetas.config.settings import Settings

        with pytest.raises(ValidationError):
            Settings(log_level="CHATTY")

    def test_run_dir(self, isolated_settings):
        from nsetas.config.settings import get_settings

        run_dir = get_settings().run_dir("fit", "demo")
        assert run_dir == isolated_settings.resolve() / "fit-demo"
        assert not run_dir.exists()


class TestRunConfig:
    """Tests for key=value run configuration files."""

    def test_from_file_resolves_paths(self, run_config_file: Path, catalog_file: Path):
        """Relative paths resolve against the configuration file's directory."""
        from nsetas.config.settings import RunConfig

        config = RunConfig.from_file(run_config_file)
        assert config.catalog == catalog_file.resolve()
        assert config.reference is not None and config.reference.is_absolute()
        assert config.changepoint == 150.0
        assert config.seed == 5
        assert config.output_dir == (run_config_file.parent / "cfg-runs").resolve()

    def test_unknown_key_rejected(self, tmp_path: Path):
        from nsetas.config.settings import RunConfig
        from nsetas.core.exceptions import ConfigurationError

        path = tmp_path / "run.env"
        path.write_text("colour=blue\n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as exc_info:
            RunConfig.from_file(path)
        assert exc_info.value.config_key == "colour"

    def test_missing_input_rejected(self, tmp_path: Path):
        """Input paths are checked before any computation starts."""
        from nsetas.config.settings import RunConfig
        from nsetas.core.exceptions import ConfigurationError

        path = tmp_path / "run.env"
        path.write_text("catalog=missing.csv\n", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="file not found"):
            RunConfig.from_file(path)

    def test_reversed_window_rejected(self, tmp_path: Path):
        from nsetas.config.settings import RunConfig
        from nsetas.core.exceptions import ConfigurationError

        path = tmp_path / "run.env"
        path.write_text("window_start=10\nwindow_end=5\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(path)

    def test_missing_file(self, tmp_path: Path):
        from nsetas.config.settings import RunConfig
        from nsetas.core.exceptions import ConfigurationError

        with pytest.raises(ConfigurationError, match="not found"):
            RunConfig.from_file(tmp_path / "nope.env")

    def test_comments_and_blank_values_ignored(self, tmp_path: Path):
        from nsetas.config.settings import RunConfig

        path = tmp_path / "run.env"
        path.write_text("# demo\nthreshold=2.5\nmodels=\n", encoding="utf-8")
        config = RunConfig.from_file(path)
        assert config.threshold == 2.5
        assert config.models is None
