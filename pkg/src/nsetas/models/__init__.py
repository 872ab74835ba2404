"""
Pydantic models for nsetas.

- catalog:    Event, Catalog
- etas:       EtasParams, ResidualSequence, FitResult, ChangePointResult
- anomaly:    Restriction, SmoothingDomain, AnomalyModel, PenaltyConfig,
              Hyperparams, BayesFit
- simulation: SimConfig, SimulationResult, RecoveryReport

Usage:
    from nsetas.models import Catalog, EtasParams
    params = EtasParams(mu=0.1, k0=0.05, c=0.01, alpha=1.0, p=1.1)
"""

from nsetas.models.anomaly import (
    ALL_LABELS,
    AnomalyModel,
    BayesFit,
    Hyperparams,
    PenaltyConfig,
    Restriction,
    SmoothingDomain,
    model_label,
    parse_label,
)
from nsetas.models.catalog import Catalog, Event
from nsetas.models.etas import (
    PARAM_NAMES,
    ChangePointResult,
    EtasParams,
    FitResult,
    ResidualSequence,
    relative_probability,
)
from nsetas.models.simulation import RecoveryReport, SimConfig, SimulationResult

__all__ = [
    # Catalog
    "Event",
    "Catalog",
    # Stationary ETAS
    "PARAM_NAMES",
    "EtasParams",
    "ResidualSequence",
    "FitResult",
    "ChangePointResult",
    "relative_probability",
    # Nonstationary
    "ALL_LABELS",
    "Restriction",
    "SmoothingDomain",
    "AnomalyModel",
    "PenaltyConfig",
    "Hyperparams",
    "BayesFit",
    "model_label",
    "parse_label",
    # Simulation
    "SimConfig",
    "SimulationResult",
    "RecoveryReport",
]
