"""
Pydantic models for stationary ETAS fits.

Types:
    EtasParams        - the five-vector (mu, K0, c, alpha, p)
    ResidualSequence  - transformed times tau_i = Lambda(t_i) and Lambda(T)
    FitResult         - one maximum-likelihood fit with AIC and standard errors
    ChangePointResult - a two-stage fit around a change point t0
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

PARAM_NAMES: tuple[str, ...] = ("mu", "k0", "c", "alpha", "p")


def relative_probability(delta: float) -> float:
    """exp(-delta / 2), the relative likelihood of a model that trails by delta."""
    exponent = -delta / 2.0
    if exponent > 709.0:
        return math.inf
    return math.exp(exponent)


class EtasParams(BaseModel):
    """
    ETAS parameters.

    lambda(t) = mu + sum_{t_i < t} K0 exp(alpha (M_i - Mz)) / (t - t_i + c)^p
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    mu: float = Field(..., ge=0, description="Background rate (events/day)")
    k0: float = Field(..., ge=0, description="Aftershock productivity (events/day)")
    c: float = Field(..., gt=0, description="Omori time offset (days)")
    alpha: float = Field(..., ge=0, description="Magnitude sensitivity (1/magnitude)")
    p: float = Field(..., gt=0, description="Omori decay exponent")

    def as_array(self) -> np.ndarray:
        """Parameters in PARAM_NAMES order."""
        return np.array([self.mu, self.k0, self.c, self.alpha, self.p], dtype=float)

    @classmethod
    def from_array(cls, values: Any) -> "EtasParams":
        """Build from a length-5 sequence in PARAM_NAMES order."""
        return cls(**dict(zip(PARAM_NAMES, (float(v) for v in values))))

    def replace(self, **changes: float) -> "EtasParams":
        """Return a validated copy with some parameters changed."""
        return EtasParams.model_validate({**self.model_dump(), **changes})


def parse_fixed(fixed: Any) -> tuple[str, ...]:
    """Normalize a fix mask (names, or a name->bool mapping) to ordered names."""
    if fixed is None:
        return ()
    if isinstance(fixed, dict):
        names = [name for name, flag in fixed.items() if flag]
    elif isinstance(fixed, str):
        names = [fixed]
    else:
        names = list(fixed)
    unknown = sorted(set(names) - set(PARAM_NAMES))
    if unknown:
        raise ValueError(f"unknown parameter name(s) in fix mask: {', '.join(unknown)}")
    return tuple(name for name in PARAM_NAMES if name in names)


class ResidualSequence(BaseModel):
    """Event times mapped through the cumulative intensity."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    times: tuple[float, ...] = Field(default_factory=tuple, description="t_i")
    taus: tuple[float, ...] = Field(default_factory=tuple, description="tau_i = Lambda(t_i)")
    total: float = Field(..., ge=0, description="Lambda(T), expected count over the window")

    @model_validator(mode="after")
    def check_ordering(self) -> "ResidualSequence":
        """
        Taus must be nondecreasing and bounded by the total.

        With mu > 0, Lambda increases strictly between distinct event
        times. Equal taus are valid only for simultaneous events.
        """
        if len(self.times) != len(self.taus):
            raise ValueError("times and taus must have equal length")
        taus = np.asarray(self.taus)
        if taus.size:
            slack = 1e-9 * max(1.0, self.total)
            if np.any(np.diff(taus) < 0):
                raise ValueError("taus must be nondecreasing")
            if taus[0] < -slack or taus[-1] > self.total + slack:
                raise ValueError("taus must lie within [0, total]")
        return self

    @cached_property
    def gaps(self) -> np.ndarray:
        """Transformed inter-event times, the first measured from zero."""
        return np.diff(np.concatenate([[0.0], np.asarray(self.taus, dtype=float)]))

    def rows(self) -> list[dict[str, float | int]]:
        """CSV rows (t_i, tau_i, i) with 1-based i."""
        return [
            {"t_i": t, "tau_i": tau, "i": i}
            for i, (t, tau) in enumerate(zip(self.times, self.taus), start=1)
        ]


class FitResult(BaseModel):
    """A maximum-likelihood ETAS fit."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    params: EtasParams
    fixed: tuple[str, ...] = Field(default_factory=tuple)
    loglik: float
    aic: float
    std_errors: dict[str, Optional[float]] = Field(default_factory=dict)
    k: int = Field(..., ge=0, description="Number of free parameters")
    converged: bool
    iterations: int = Field(..., ge=0)
    n_events: int = Field(default=0, ge=0)
    window: tuple[float, float] = (0.0, 0.0)
    warnings: tuple[str, ...] = Field(default_factory=tuple)

    @field_validator("fixed", mode="before")
    @classmethod
    def normalize_fixed(cls, v: Any) -> tuple[str, ...]:
        return parse_fixed(v)

    @model_validator(mode="after")
    def check_consistency(self) -> "FitResult":
        """k, AIC and the standard-error keys must agree with the fix mask."""
        if self.k != len(PARAM_NAMES) - len(self.fixed):
            raise ValueError("k must equal the number of free parameters")
        if not math.isclose(self.aic, -2.0 * self.loglik + 2 * self.k, rel_tol=1e-12, abs_tol=1e-9):
            raise ValueError("aic must equal -2 loglik + 2k")
        free = set(self.free)
        for name, se in self.std_errors.items():
            if name not in free:
                raise ValueError(f"standard error given for fixed parameter '{name}'")
            if se is not None and not se >= 0:
                raise ValueError(f"standard error of '{name}' must be nonnegative")
        return self

    @property
    def free(self) -> tuple[str, ...]:
        """Names of the estimated parameters."""
        return tuple(name for name in PARAM_NAMES if name not in self.fixed)

    def to_report(self) -> dict[str, Any]:
        """JSON report {params, fixed, loglik, aic, se, converged, iterations}."""
        return {
            "params": self.params.model_dump(),
            "fixed": list(self.fixed),
            "loglik": self.loglik,
            "aic": self.aic,
            "se": dict(self.std_errors),
            "converged": self.converged,
            "iterations": self.iterations,
            "n_events": self.n_events,
            "window": list(self.window),
            "warnings": list(self.warnings),
        }


class ChangePointResult(BaseModel):
    """Whole-window fit against fits on [S, t0) and [t0, T]."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    t0: float
    fit_whole: FitResult
    fit_before: FitResult
    fit_after: FitResult
    q_penalty: float = Field(..., ge=0)
    aic12: float
    delta_aic: float
    significant: bool
    history_reset: bool = False
    candidates_evaluated: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_assembly(self) -> "ChangePointResult":
        """AIC12 = AIC1 + AIC2 + 2q and the change point is inside the window."""
        start, end = self.fit_whole.window
        if not start < self.t0 < end:
            raise ValueError(f"t0={self.t0} must lie strictly inside ({start}, {end})")
        expected = self.fit_before.aic + self.fit_after.aic + 2.0 * self.q_penalty
        if self.aic12 != expected:
            raise ValueError("aic12 must equal aic1 + aic2 + 2q")
        if self.delta_aic != self.aic12 - self.fit_whole.aic:
            raise ValueError("delta_aic must equal aic12 - aic0")
        if self.significant != (self.delta_aic < 0):
            raise ValueError("significant must equal delta_aic < 0")
        return self

    @property
    def relative_probability(self) -> float:
        """exp(-delta_aic / 2)."""
        return relative_probability(self.delta_aic)

    def to_report(self) -> dict[str, Any]:
        """JSON report of the change-point test."""
        return {
            "t0": self.t0,
            "aic0": self.fit_whole.aic,
            "aic1": self.fit_before.aic,
            "aic2": self.fit_after.aic,
            "q": self.q_penalty,
            "aic12": self.aic12,
            "delta_aic": self.delta_aic,
            "significant": self.significant,
            "relative_probability": self.relative_probability,
            "history_reset": self.history_reset,
            "candidates_evaluated": self.candidates_evaluated,
            "fits": {
                "whole": self.fit_whole.to_report(),
                "before": self.fit_before.to_report(),
                "after": self.fit_after.to_report(),
            },
        }
