"""
Pydantic models for catalog simulation and simulate-and-recover runs.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from nsetas.models.anomaly import AnomalyModel
from nsetas.models.catalog import Catalog
from nsetas.models.etas import EtasParams


class SimConfig(BaseModel):
    """
    Simulation settings.

    Exactly one of ``params`` (stationary ETAS) and ``anomaly``
    (nonstationary model over its own reference parameters) is given.
    A zero-length window is accepted and simulates nothing.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    params: Optional[EtasParams] = None
    anomaly: Optional[AnomalyModel] = None
    window_start: float = Field(default=0.0, ge=0)
    window_end: float
    b_value: float = Field(default=1.0, gt=0, description="Gutenberg-Richter b-value")
    m_c: float = Field(default=2.5, description="Completeness magnitude (also Mz)")
    seed: int = Field(..., ge=0, lt=2**64)
    max_events: int = Field(default=100_000, gt=0)
    origin_epoch: Optional[str] = None

    @model_validator(mode="after")
    def check_model(self) -> "SimConfig":
        """One model source and an ordered window that the anomaly knots span."""
        if (self.params is None) == (self.anomaly is None):
            raise ValueError("exactly one of params and anomaly must be given")
        if self.window_end < self.window_start:
            raise ValueError("window_end must not precede window_start")
        if self.anomaly is not None and (
            self.anomaly.knots[0] > self.window_start
            or self.anomaly.knots[-1] < self.window_end
        ):
            raise ValueError("anomaly knots must span the simulation window")
        return self

    @property
    def reference(self) -> EtasParams:
        """Stationary parameters, or the anomaly model's reference."""
        if self.params is not None:
            return self.params
        assert self.anomaly is not None
        return self.anomaly.reference

    @property
    def window(self) -> tuple[float, float]:
        return (self.window_start, self.window_end)


class SimulationResult(BaseModel):
    """A simulated catalog and the thinning run's diagnostics."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    catalog: Catalog
    truncated: bool = False
    branching_ratio: float = Field(..., ge=0)
    candidates: int = Field(default=0, ge=0)
    rejected: int = Field(default=0, ge=0)
    warnings: tuple[str, ...] = Field(default_factory=tuple)


class RecoveryReport(BaseModel):
    """Coverage of the true anomaly factors by the refit's 2-sigma bands."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_events: int = Field(default=0, ge=0)
    anchoring: Literal["positional", "temporal"] = "positional"
    changepoint_index: Optional[int] = None
    changepoint: Optional[float] = None
    knots_checked: int = Field(default=0, ge=0)
    coverage_mu: Optional[float] = Field(default=None, ge=0, le=1)
    coverage_k: Optional[float] = Field(default=None, ge=0, le=1)
    delta_abic: Optional[float] = None
    truncated: bool = False
    warnings: tuple[str, ...] = Field(default_factory=tuple)

    @property
    def empty(self) -> bool:
        """True when nothing could be fitted."""
        return self.knots_checked == 0

    def to_report(self) -> dict[str, Any]:
        return self.model_dump(mode="json")
