"""
Pydantic models for nonstationary ETAS models.

The background rate and the productivity of a reference ETAS model are
modulated by piecewise-linear anomaly factors:

    lambda_q(t) = mu q_mu(t) + sum_{t_i < t} K0 q_K(t_i) exp(alpha (M_i - Mz)) / (t - t_i + c)^p

Three restrictions on the factors are combined with two choices of the
time axis on which roughness is measured, with or without a change point,
giving twelve labelled configurations ("1a" ... "3b′").
"""

from __future__ import annotations

import math
import re
from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nsetas.models.etas import EtasParams

PRIME = "′"


class Restriction(str, Enum):
    """Constraint tying the two anomaly factors."""

    FIX_QK = "fix_qk"  # q_K(t) = 1
    TIED = "tied"  # q_mu(t) = q_K(t)
    FREE = "free"

    @property
    def number(self) -> int:
        """Model number used in labels."""
        return {"fix_qk": 1, "tied": 2, "free": 3}[self.value]

    @classmethod
    def from_number(cls, number: int) -> "Restriction":
        for member in cls:
            if member.number == number:
                return member
        raise ValueError(f"no restriction numbered {number}")


class SmoothingDomain(str, Enum):
    """Time axis on which the roughness penalty is measured."""

    ORDINARY = "ordinary"
    TRANSFORMED = "transformed"

    @property
    def letter(self) -> str:
        return "a" if self is SmoothingDomain.ORDINARY else "b"


def model_label(
    restriction: Restriction, domain: SmoothingDomain, with_changepoint: bool
) -> str:
    """Label such as "1a", "2b" or "3a′"."""
    return f"{restriction.number}{domain.letter}{PRIME if with_changepoint else ''}"


_LABEL_RE = re.compile(r"^([123])([ab])(['′]?)$")


def parse_label(label: str) -> tuple[Restriction, SmoothingDomain, bool]:
    """
    Inverse of model_label. An ASCII apostrophe is accepted for the prime.

    Raises:
        ValueError: If the label is not one of the twelve configurations
    """
    match = _LABEL_RE.match(label.strip())
    if not match:
        raise ValueError(f"unknown model label '{label}' (expected e.g. 1a, 2b, 3a′)")
    restriction = Restriction.from_number(int(match.group(1)))
    domain = SmoothingDomain.ORDINARY if match.group(2) == "a" else SmoothingDomain.TRANSFORMED
    return restriction, domain, bool(match.group(3))


ALL_LABELS: tuple[str, ...] = tuple(
    model_label(r, d, cp)
    for cp in (False, True)
    for r in Restriction
    for d in SmoothingDomain
)


class AnomalyModel(BaseModel):
    """Anomaly factor coefficients on event-time knots."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    knots: tuple[float, ...] = Field(..., min_length=2)
    q_mu: tuple[float, ...]
    q_k: tuple[float, ...]
    restriction: Restriction
    smoothing_domain: SmoothingDomain
    changepoint: Optional[float] = None
    reference: EtasParams

    @model_validator(mode="after")
    def check_coefficients(self) -> "AnomalyModel":
        """Coefficient counts, signs and the restriction's structural constraint."""
        n = len(self.knots)
        if len(self.q_mu) != n or len(self.q_k) != n:
            raise ValueError("coefficient counts must equal the knot count")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if min(self.q_mu) < 0 or min(self.q_k) < 0:
            raise ValueError("anomaly factors must be nonnegative")
        if self.restriction is Restriction.FIX_QK and any(q != 1.0 for q in self.q_k):
            raise ValueError("q_k must be identically 1 under the fix_qk restriction")
        if self.restriction is Restriction.TIED and self.q_mu != self.q_k:
            raise ValueError("q_mu and q_k must coincide under the tied restriction")
        if self.changepoint is not None and not self.knots[0] < self.changepoint < self.knots[-1]:
            raise ValueError("changepoint must lie strictly inside the knot range")
        return self

    @classmethod
    def flat(
        cls,
        knots: Any,
        restriction: Restriction,
        smoothing_domain: SmoothingDomain,
        reference: EtasParams,
        changepoint: Optional[float] = None,
    ) -> "AnomalyModel":
        """The reference model itself: every coefficient equal to 1."""
        ones = tuple(1.0 for _ in knots)
        return cls(
            knots=tuple(float(k) for k in knots),
            q_mu=ones,
            q_k=ones,
            restriction=restriction,
            smoothing_domain=smoothing_domain,
            changepoint=changepoint,
            reference=reference,
        )

    @property
    def label(self) -> str:
        return model_label(self.restriction, self.smoothing_domain, self.changepoint is not None)

    @property
    def mu_coefficients(self) -> np.ndarray:
        return np.asarray(self.q_mu, dtype=float)

    @property
    def k_coefficients(self) -> np.ndarray:
        return np.asarray(self.q_k, dtype=float)

    def to_report(self) -> dict[str, Any]:
        """JSON form: knots, q_mu, q_k, restriction, domain, changepoint, reference."""
        return {
            "label": self.label,
            "knots": list(self.knots),
            "q_mu": list(self.q_mu),
            "q_k": list(self.q_k),
            "restriction": self.restriction.value,
            "smoothing_domain": self.smoothing_domain.value,
            "changepoint": self.changepoint,
            "reference": self.reference.model_dump(),
        }


class PenaltyConfig(BaseModel):
    """Roughness-penalty weights."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    w_mu: float = Field(..., gt=0)
    w_k: float = Field(..., gt=0)
    changepoint_weight: float = Field(default=1e-5, gt=0)


class Hyperparams(BaseModel):
    """Penalty weights and the fixed end-of-window coefficients."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    w_mu: float = Field(..., gt=0)
    w_k: float = Field(..., gt=0)
    q_mu_boundary: float = Field(default=1.0, ge=0)
    q_k_boundary: float = Field(default=1.0, ge=0)

    def penalty(self, changepoint_weight: float) -> PenaltyConfig:
        return PenaltyConfig(
            w_mu=self.w_mu, w_k=self.w_k, changepoint_weight=changepoint_weight
        )


class BayesFit(BaseModel):
    """
    Optimal MAP estimate at Type-II maximum-likelihood hyperparameters.

    ``covariance`` is the inverse negative Hessian over the free
    coefficients; ``free_index`` maps its rows to (factor, knot) pairs with
    factor 0 for q_mu and 1 for q_K. It is kept in memory only and is not
    part of the JSON form.
    """

    model_config = ConfigDict(
        frozen=True, extra="forbid", arbitrary_types_allowed=True
    )

    map: AnomalyModel
    hyper: Hyperparams
    changepoint_weight: float = Field(default=1e-5, gt=0)
    log_marginal: float
    abic: float
    delta_abic: Optional[float] = None
    hyperparameter_count: int = Field(..., ge=0)
    penalized_loglik: float
    loglik: float
    error_mu: tuple[float, ...] = Field(default_factory=tuple)
    error_k: tuple[float, ...] = Field(default_factory=tuple)
    hessian_log_det: float
    hessian_log_det_mu: Optional[float] = None
    hessian_log_det_k: Optional[float] = None
    active_constraints: int = Field(default=0, ge=0)
    converged: bool = True
    baseline: bool = False
    evaluations: int = Field(default=0, ge=0)
    warnings: tuple[str, ...] = Field(default_factory=tuple)
    covariance: Optional[np.ndarray] = Field(default=None, exclude=True, repr=False)
    free_index: Optional[tuple[tuple[int, int], ...]] = Field(
        default=None, exclude=True, repr=False
    )

    @model_validator(mode="after")
    def check_scores(self) -> "BayesFit":
        """ABIC and error traces must be consistent."""
        expected = -2.0 * self.log_marginal + 2 * self.hyperparameter_count
        if not math.isclose(self.abic, expected, rel_tol=1e-12, abs_tol=1e-9):
            raise ValueError("abic must equal -2 log_marginal + 2 * hyperparameter_count")
        if any(e < 0 for e in self.error_mu) or any(e < 0 for e in self.error_k):
            raise ValueError("error traces must be nonnegative")
        return self

    @property
    def label(self) -> str:
        return self.map.label

    @property
    def restriction(self) -> Restriction:
        return self.map.restriction

    @property
    def smoothing_domain(self) -> SmoothingDomain:
        return self.map.smoothing_domain

    def to_report(self) -> dict[str, Any]:
        """JSON form of the fit; the MAP model is written alongside it."""
        return {
            "label": self.label,
            "restriction": self.restriction.value,
            "domain": self.smoothing_domain.value,
            "changepoint": self.map.changepoint,
            "changepoint_weight": self.changepoint_weight,
            "weights": {"w_mu": self.hyper.w_mu, "w_k": self.hyper.w_k},
            "boundary": {
                "q_mu": self.hyper.q_mu_boundary,
                "q_k": self.hyper.q_k_boundary,
            },
            "log_marginal": self.log_marginal,
            "hyperparameter_count": self.hyperparameter_count,
            "abic": self.abic,
            "delta_abic": self.delta_abic,
            "penalized_loglik": self.penalized_loglik,
            "loglik": self.loglik,
            "hessian_log_det": self.hessian_log_det,
            "hessian_log_det_mu": self.hessian_log_det_mu,
            "hessian_log_det_k": self.hessian_log_det_k,
            "active_constraints": self.active_constraints,
            "converged": self.converged,
            "baseline": self.baseline,
            "evaluations": self.evaluations,
            "warnings": list(self.warnings),
        }
