"""
Exception hierarchy for nsetas.

Every error a command can report derives from NsetasError; the CLI maps
them to exit status 1. Analysis failures carry the model label and the
failing operation so a batch of fits can name which one broke.

    NsetasError
    ├── ValidationError            bad argument or parameter value
    ├── DataLoadError              unreadable catalog or result file
    ├── ConfigurationError         bad settings or run configuration
    ├── FitError                   an estimation step failed
    │   ├── DegenerateLikelihoodError
    │   ├── EmptyPeriodError
    │   ├── ConvergenceError
    │   └── LaplaceError
    ├── ModelSelectionError        fits cannot be ranked against each other
    └── SimulationError            thinning bound violated
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, ClassVar, Optional


class NsetasError(Exception):
    """
    Base exception for all nsetas errors.

    Attributes:
        message: Human-readable error message
        details: Extra structured data, serialized by to_dict
    """

    # Attribute names added to to_dict() by subclasses
    context: ClassVar[tuple[str, ...]] = ()

    def __init__(self, message: str, *, details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.message!r}, details={self.details!r})"

    def to_dict(self) -> dict[str, Any]:
        """Error type, message, details and the subclass context fields."""
        data: dict[str, Any] = {
            "error_type": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
        }
        data.update({name: getattr(self, name) for name in self.context})
        return data


class ValidationError(NsetasError):
    """
    An argument or parameter value violates a precondition.

    Raised by the evaluation kernels (c <= 0, negative rates, non-finite
    values) and for malformed model configurations.
    """

    context = ("field", "value")

    def __init__(
        self,
        message: str,
        *,
        field: Optional[str] = None,
        value: Any = None,
        details: Optional[dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details=details)
        self.field = field
        self.value = value

    def __str__(self) -> str:
        if self.field:
            return f"Invalid argument '{self.field}': {self.message}"
        return f"Invalid argument: {self.message}"


class DataLoadError(NsetasError):
    """A catalog or result file cannot be read; ``line`` is 1-based."""

    context = ("filepath", "line")

    def __init__(
        self,
        message: str,
        *,
        filepath: Optional[str | Path] = None,
        line: Optional[int] = None,
        details: Optional[dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details=details)
        self.filepath = str(filepath) if filepath else None
        self.line = line

    def __str__(self) -> str:
        if self.filepath is None and self.line is None:
            return f"Data load error: {self.message}"
        where = self.filepath or "<stream>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        return f"Data load error for '{where}': {self.message}"


class ConfigurationError(NsetasError):
    context = ("config_key",)

    def __init__(
        self,
        message: str,
        *,
        config_key: Optional[str] = None,
        details: Optional[dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details=details)
        self.config_key = config_key

    def __str__(self) -> str:
        if self.config_key:
            return f"Configuration error for '{self.config_key}': {self.message}"
        return f"Configuration error: {self.message}"


class FitError(NsetasError):
    """
    An estimation step failed.

    Attributes:
        model: Label of the model being fitted ("etas", "before", "3a′")
        operation: Function that failed ("fit_mle", "map_estimate")
    """

    context = ("model", "operation")

    def __init__(
        self,
        message: str,
        *,
        model: Optional[str] = None,
        operation: Optional[str] = None,
        details: Optional[dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details=details)
        self.model = model
        self.operation = operation

    def __str__(self) -> str:
        prefix = " ".join(
            part
            for part in (
                f"model {self.model}" if self.model else "",
                f"operation '{self.operation}'" if self.operation else "",
            )
            if part
        )
        return f"{prefix or 'Fit error'}: {self.message}"


class DegenerateLikelihoodError(FitError):
    """The conditional intensity vanished at an observed event (log-likelihood is -inf)."""


class EmptyPeriodError(FitError):
    """A fitting window holds no events."""

    context = (*FitError.context, "period")

    def __init__(
        self,
        message: str,
        *,
        period: Optional[tuple[float, float]] = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.period = period


class ConvergenceError(FitError):
    """An iterative solver could not produce a usable iterate."""


class LaplaceError(FitError):
    """The negative Hessian at the MAP is not positive definite."""


class ModelSelectionError(NsetasError):
    pass


class SimulationError(NsetasError):
    pass
