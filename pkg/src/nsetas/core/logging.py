"""
Logging for nsetas.

All loggers hang below the ``nsetas`` logger. The console handler is a
rich handler when rich is importable; NSETAS_LOG_FILE adds a plain file
handler. Fits log through an adapter that prefixes the model label, so the
interleaved output of a parallel ``nsfit`` stays readable:

    [3a′] hyperparameter search stagnated, restarting once
    [before] restart 2 improved loglik to -412.0311

Usage:
    from nsetas.core.logging import get_logger, get_fit_logger

    logger = get_logger(__name__)
    fit_log = get_fit_logger("1a′")
"""

from __future__ import annotations

import logging
import sys
from collections.abc import MutableMapping
from pathlib import Path
from typing import Any, Optional

try:
    from rich.logging import RichHandler

    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False


DEFAULT_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
DEFAULT_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
PACKAGE_NAME = "nsetas"


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Logger ``nsetas.<name>`` (the package logger when name is None)."""
    if name is None:
        return logging.getLogger(PACKAGE_NAME)
    if not name.startswith(PACKAGE_NAME):
        name = f"{PACKAGE_NAME}.{name}"
    return logging.getLogger(name)


def _plain_handler(handler: logging.Handler, level: int, log_format: str) -> logging.Handler:
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(log_format, datefmt=DEFAULT_DATE_FORMAT))
    return handler


def setup_logging(
    level: str = "INFO",
    log_file: Optional[Path | str] = None,
    format_string: Optional[str] = None,
    use_rich: bool = True,
) -> None:
    """
    Replace the package logger's handlers.

    Args:
        level: DEBUG, INFO, WARNING, ERROR or CRITICAL (any case)
        log_file: Also write records to this file
        format_string: Record format for plain handlers
        use_rich: Use rich for the console when it is available

    Raises:
        ValueError: If level is not a valid log level
    """
    level = level.upper()
    numeric_level = getattr(logging, level, None)
    if not isinstance(numeric_level, int):
        raise ValueError(f"Invalid log level: {level}")

    log_format = format_string or DEFAULT_FORMAT
    logger = logging.getLogger(PACKAGE_NAME)
    logger.setLevel(numeric_level)
    logger.handlers.clear()
    logger.propagate = False

    if use_rich and RICH_AVAILABLE:
        logger.addHandler(
            RichHandler(level=numeric_level, show_time=True, show_path=False, rich_tracebacks=True)
        )
    else:
        logger.addHandler(_plain_handler(logging.StreamHandler(sys.stderr), numeric_level, log_format))

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        logger.addHandler(
            _plain_handler(logging.FileHandler(log_path, encoding="utf-8"), numeric_level, log_format)
        )

    logger.debug("Logging configured: level=%s, file=%s", level, log_file)


def configure_from_settings(level: Optional[str] = None) -> None:
    """Configure logging from application settings; ``level`` overrides the configured one."""
    from nsetas.config.settings import get_settings

    settings = get_settings()
    setup_logging(
        level=level or settings.log_level,
        log_file=settings.log_file,
        format_string=settings.log_format,
    )


class FitLoggerAdapter(logging.LoggerAdapter):  # type: ignore[type-arg]
    """Prefixes each message with ``[label]`` and records the label as ``extra["model"]``."""

    def process(
        self, msg: Any, kwargs: MutableMapping[str, Any]
    ) -> tuple[Any, MutableMapping[str, Any]]:
        extra = {**(kwargs.get("extra") or {}), **(self.extra or {})}
        kwargs["extra"] = extra
        label = extra.get("model")
        return (f"[{label}] {msg}" if label else msg), kwargs


def get_fit_logger(label: str, name: str = "fit") -> FitLoggerAdapter:
    """Logger for one fit, e.g. ``get_fit_logger("3a′", "bayes")``."""
    return FitLoggerAdapter(get_logger(name), {"model": label})
