"""
Unit tests for the logging module.
"""

import logging

import pytest


@pytest.fixture(autouse=True)
def restore_package_logger():
    """Close handlers added by a test so file handles are not leaked."""
    yield
    logger = logging.getLogger("nsetas")
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)


class TestGetLogger:
    """Tests for get_logger."""

    def test_namespaced_under_package(self):
        """Module loggers should be children of the nsetas logger."""
        from nsetas.core.logging import get_logger

        assert get_logger("etas.mle").name == "nsetas.etas.mle"

    def test_already_namespaced_name_kept(self):
        from nsetas.core.logging import get_logger

        assert get_logger("nsetas.etas.bayes").name == "nsetas.etas.bayes"

    def test_default_name(self):
        from nsetas.core.logging import get_logger

        assert get_logger().name == "nsetas"

    def test_same_logger_for_same_name(self):
        from nsetas.core.logging import get_logger

        assert get_logger("x") is get_logger("x")


class TestSetupLogging:
    """Tests for setup_logging."""

    def test_sets_level(self):
        from nsetas.core.logging import get_logger, setup_logging

        setup_logging(level="debug", use_rich=False)
        assert get_logger().level == logging.DEBUG

    def test_invalid_level(self):
        from nsetas.core.logging import setup_logging

        with pytest.raises(ValueError):
            setup_logging(level="LOUD")

    def test_replaces_handlers(self):
        """Calling setup_logging twice should not duplicate handlers."""
        from nsetas.core.logging import get_logger, setup_logging

        setup_logging(level="INFO", use_rich=False)
        setup_logging(level="INFO", use_rich=False)
        assert len(get_logger().handlers) == 1

    def test_file_handler(self, tmp_path):
        """A log file should receive formatted records."""
        from nsetas.core.logging import get_logger, setup_logging

        log_file = tmp_path / "logs" / "nsetas.log"
        setup_logging(level="INFO", log_file=log_file, use_rich=False)
        get_logger("etas").info("fitted")
        for handler in get_logger().handlers:
            handler.flush()
        text = log_file.read_text(encoding="utf-8")
        assert "fitted" in text
        assert "nsetas.etas" in text

    def test_configure_from_settings_override(self):
        """An explicit level should win over the settings value."""
        from nsetas.core.logging import configure_from_settings, get_logger

        configure_from_settings("WARNING")
        assert get_logger().level == logging.WARNING


class TestFitLogger:
    """Tests for the model-label adapter."""

    def test_prefixes_label(self):
        from nsetas.core.logging import get_fit_logger

        adapter = get_fit_logger("3a′")
        msg, kwargs = adapter.process("MAP converged", {})
        assert msg == "[3a′] MAP converged"
        assert kwargs["extra"]["model"] == "3a′"

    def test_logger_name(self):
        from nsetas.core.logging import get_fit_logger

        assert get_fit_logger("etas", "hyper").logger.name == "nsetas.hyper"
