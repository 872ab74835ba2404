"""
Application settings management using Pydantic.

This module provides centralized configuration management with:
- Environment variable loading (NSETAS_* prefix)
- Numerical tolerances shared by every fitter
- Singleton pattern for global access
- Plain-text key=value run configuration files for the CLI
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError as PydanticValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from nsetas.core.exceptions import ConfigurationError

# Module-level cache for singleton pattern
_settings_instance: Optional["Settings"] = None

VALID_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


class Settings(BaseSettings):
    """
    Application settings with environment variable support.

    All settings can be overridden via environment variables with NSETAS_ prefix.
    For example: NSETAS_LOG_LEVEL=DEBUG, NSETAS_OUTPUT_DIR=/path/to/runs
    """

    model_config = SettingsConfigDict(
        env_prefix="NSETAS_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Core paths
    output_dir: Path = Field(
        default_factory=lambda: Path.cwd() / "nsetas-runs",
        description="Root directory receiving one sub-directory per run",
    )

    # Logging configuration
    log_level: str = Field(
        default="INFO",
        description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)",
    )
    log_file: Optional[Path] = Field(
        default=None,
        description="Path to log file. If None, logs only to console",
    )
    log_format: str = Field(
        default="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
        description="Log message format string",
    )

    # Behavior flags
    strict_mode: bool = Field(
        default=False,
        description="If True, catalog warnings (ignored columns) become errors",
    )
    debug_thinning: bool = Field(
        default=False,
        description="If True, assert the dominating rate at every thinning candidate",
    )

    # Stationary MLE
    mle_gtol: float = Field(default=1e-6, gt=0, description="Gradient max-norm tolerance")
    mle_max_iter: int = Field(default=500, ge=1, description="Quasi-Newton iteration cap")
    mle_restart_scale: float = Field(
        default=0.2, gt=0, description="Log-normal spread of multistart inits"
    )
    runaway_threshold: float = Field(
        default=1e6, gt=0, description="Bound on mu, K0, c above which a fit is flagged"
    )
    kahan_threshold: int = Field(
        default=10_000, ge=1, description="Event count above which sums are compensated"
    )

    # Penalized likelihood and hyperparameter search
    map_gtol: float = Field(default=1e-6, gt=0)
    map_max_iter: int = Field(default=1000, ge=1)
    hyper_fatol: float = Field(default=1e-4, gt=0)
    hyper_xatol: float = Field(default=1e-3, gt=0)
    hyper_max_iter: int = Field(default=400, ge=1)
    heavy_weight: float = Field(
        default=1e6, gt=0, description="Fixed weight of the flat ABIC0 baseline"
    )
    changepoint_weight: float = Field(
        default=1e-5, gt=0, description="Weight of the interval holding a change point"
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        """Normalize log level to uppercase and validate."""
        if isinstance(v, str):
            v = v.upper()
            if v not in VALID_LOG_LEVELS:
                raise ValueError(
                    f"Invalid log level '{v}'. Must be one of: {', '.join(sorted(VALID_LOG_LEVELS))}"
                )
        return v

    @field_validator("output_dir", mode="before")
    @classmethod
    def resolve_output_dir(cls, v: str | Path) -> Path:
        """Convert string paths to Path objects and resolve."""
        if isinstance(v, str):
            v = Path(v)
        return v.resolve() if v else Path.cwd()

    def run_dir(self, command: str, run_name: str) -> Path:
        """
        Get the directory path for a single CLI run.

        Args:
            command: CLI command name (fit, nsfit, ...)
            run_name: Per-run name, a UTC timestamp unless given explicitly

        Returns:
            Path to the run directory (not created)
        """
        return self.output_dir / f"{command}-{run_name}"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Get the application settings (singleton).

    On first call, it loads settings from environment variables and .env file.

    Returns:
        The Settings instance

    Example:
        >>> settings = get_settings()
        >>> print(settings.map_gtol)
    """
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = Settings()
    return _settings_instance


def reset_settings() -> None:
    """
    Reset the settings cache.

    Useful for testing or when environment variables change.
    """
    global _settings_instance
    _settings_instance = None
    get_settings.cache_clear()


# ==================== Run configuration ====================


class RunConfig(BaseModel):
    """
    Key=value run configuration accepted by every CLI command via ``--config``.

    Unknown keys are rejected and paths are resolved when the file is read,
    before any computation starts. Command-line flags override file values.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    catalog: Optional[Path] = None
    window_start: Optional[float] = None
    window_end: Optional[float] = None
    history_start: Optional[float] = None
    threshold: Optional[float] = None
    reference: Optional[Path] = None
    models: Optional[str] = None
    changepoint: Optional[float] = None
    changepoint_weight: Optional[float] = Field(default=None, gt=0)
    q_penalty: Optional[float] = Field(default=None, ge=0)
    seed: Optional[int] = Field(default=None, ge=0)
    output_dir: Optional[Path] = None

    @field_validator("catalog", "reference", mode="after")
    @classmethod
    def input_must_exist(cls, v: Optional[Path]) -> Optional[Path]:
        """Resolve input paths and require that they exist."""
        if v is None:
            return v
        v = v.expanduser().resolve()
        if not v.is_file():
            raise ValueError(f"file not found: {v}")
        return v

    @field_validator("output_dir", mode="after")
    @classmethod
    def resolve_output(cls, v: Optional[Path]) -> Optional[Path]:
        """Resolve the output directory (it need not exist yet)."""
        return v.expanduser().resolve() if v is not None else v

    @model_validator(mode="after")
    def check_window(self) -> "RunConfig":
        """Window bounds must be ordered when both are given."""
        if (
            self.window_start is not None
            and self.window_end is not None
            and self.window_start > self.window_end
        ):
            raise ValueError("window_start must not exceed window_end")
        return self

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        """
        Read a plain-text key=value run configuration.

        Args:
            path: Path to the configuration file

        Returns:
            Validated RunConfig

        Raises:
            ConfigurationError: On unreadable files, unknown keys or bad values
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"Run configuration not found: {path}")

        raw: dict[str, Any] = {
            key.strip().lower(): value
            for key, value in dotenv_values(path).items()
            if value is not None and value != ""
        }
        # Relative paths are relative to the configuration file itself
        for key in ("catalog", "reference", "output_dir"):
            if key in raw and not Path(raw[key]).is_absolute():
                raw[key] = str(path.parent / raw[key])

        try:
            return cls.model_validate(raw)
        except PydanticValidationError as e:
            first = e.errors()[0]
            key = ".".join(str(loc) for loc in first["loc"]) or None
            raise ConfigurationError(
                f"{first['msg']} (in {path})",
                config_key=key,
                details={"errors": [err["msg"] for err in e.errors()]},
            ) from e
