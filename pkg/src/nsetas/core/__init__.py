"""
Core functionality for nsetas.

This module contains the exception hierarchy and logging helpers. The
catalog reader and schema validator live in ``nsetas.core.loader`` and
``nsetas.core.schema`` and are imported from there directly.
"""

from nsetas.core.exceptions import (
    ConfigurationError,
    ConvergenceError,
    DataLoadError,
    DegenerateLikelihoodError,
    EmptyPeriodError,
    FitError,
    LaplaceError,
    ModelSelectionError,
    NsetasError,
    SimulationError,
    ValidationError,
)
from nsetas.core.logging import get_fit_logger, get_logger, setup_logging

__all__ = [
    # Exceptions
    "NsetasError",
    "ValidationError",
    "DataLoadError",
    "ConfigurationError",
    "FitError",
    "DegenerateLikelihoodError",
    "EmptyPeriodError",
    "ConvergenceError",
    "LaplaceError",
    "ModelSelectionError",
    "SimulationError",
    # Logging
    "get_logger",
    "get_fit_logger",
    "setup_logging",
]
