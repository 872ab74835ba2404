"""
Nonstationary ETAS models with piecewise-linear anomaly factors.

The background rate and productivity of a reference model are scaled by
broken-line factors q_mu(t) and q_K(t) whose coordinates sit at the knots
{S, event times, T}. A parent event carries the factor q_K(t_j) of its own
occurrence time, so the intensity at every event and the compensator are
both linear in the coefficient vectors:

    lambda_q(t_i) = (X z + h)_i,     int_S^T lambda_q dt = lin . z + const

The log-likelihood is then concave in the coefficients and the roughness
penalties are quadratic, which is what the projected Newton solver in
``maximize_penalized`` relies on.

Knots at coincident event times are merged; several events then share one
coefficient.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Any, Optional, Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from nsetas.config.settings import get_settings
from nsetas.core.exceptions import (
    ConvergenceError,
    DegenerateLikelihoodError,
    EmptyPeriodError,
    ValidationError,
)
from nsetas.core.logging import get_fit_logger
from nsetas.etas.intensity import (
    cumulative_curve,
    event_integrals,
    residuals_from_curve,
    trigger_matrix,
    trigger_sums,
    triggered_curve,
)
from nsetas.models.anomaly import (
    AnomalyModel,
    PenaltyConfig,
    Restriction,
    SmoothingDomain,
    model_label,
)
from nsetas.models.catalog import Catalog
from nsetas.models.etas import EtasParams, ResidualSequence

MU, K = "mu", "k"


# ==================== Spline basis ====================


class SplineBasis(BaseModel):
    """
    Tent functions on the knots {S, event times, T}.

    ``event_knot`` maps every catalog event to its knot index (-1 for
    history events); ``tau_knots`` holds Lambda(knot) under the reference
    model when roughness is measured in transformed time.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    knots: tuple[float, ...] = Field(..., min_length=2)
    domain: SmoothingDomain = SmoothingDomain.ORDINARY
    tau_knots: Optional[tuple[float, ...]] = None
    event_knot: tuple[int, ...] = Field(default_factory=tuple)

    @model_validator(mode="after")
    def check_knots(self) -> "SplineBasis":
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if self.domain is SmoothingDomain.TRANSFORMED:
            if self.tau_knots is None or len(self.tau_knots) != len(self.knots):
                raise ValueError("transformed-time basis needs one tau per knot")
            if np.any(np.diff(self.tau_knots) <= 0):
                raise ValueError("transformed knots must be strictly increasing")
        return self

    @property
    def size(self) -> int:
        return len(self.knots)

    @cached_property
    def knot_array(self) -> np.ndarray:
        return np.asarray(self.knots, dtype=float)

    @cached_property
    def gaps(self) -> np.ndarray:
        """Inter-knot gaps in ordinary time."""
        return np.diff(self.knot_array)

    @cached_property
    def smoothing_gaps(self) -> np.ndarray:
        """Inter-knot gaps on the axis the roughness is measured on."""
        if self.domain is SmoothingDomain.TRANSFORMED:
            assert self.tau_knots is not None
            return np.diff(np.asarray(self.tau_knots, dtype=float))
        return self.gaps

    @cached_property
    def target_knot(self) -> np.ndarray:
        """Knot index of each in-window event, in catalog order."""
        index = np.asarray(self.event_knot, dtype=int)
        return index[index >= 0]

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """w with int_S^T sum_k q_k F_k(t) dt = w . q (ordinary time)."""
        weights = np.zeros(self.size)
        weights[:-1] += 0.5 * self.gaps
        weights[1:] += 0.5 * self.gaps
        return weights

    def tent_matrix(self, times: Any) -> np.ndarray:
        """F[r, i] = F_i(times[r]); rows sum to one."""
        times = np.asarray(times, dtype=float)
        knots = self.knot_array
        interval = np.clip(np.searchsorted(knots, times, side="right") - 1, 0, self.size - 2)
        frac = (times - knots[interval]) / self.gaps[interval]
        matrix = np.zeros((times.size, self.size))
        rows = np.arange(times.size)
        matrix[rows, interval] = 1.0 - frac
        matrix[rows, interval + 1] = frac
        return matrix

    def event_factors(self, coefficients: Any) -> np.ndarray:
        """Per-event factor: the coefficient of the event's knot, 1 for history."""
        q = np.asarray(coefficients, dtype=float)
        index = np.asarray(self.event_knot, dtype=int)
        return np.where(index >= 0, q[np.maximum(index, 0)], 1.0)

    def changepoint_interval(self, t0: Optional[float]) -> Optional[int]:
        """
        Index k of the interval (knot_k, knot_k+1] that contains t0.

        Intervals are closed on the right, so a t0 equal to knot_j belongs
        to (knot_j-1, knot_j], the interval it ends, and k = j - 1.
        """
        if t0 is None:
            return None
        if not self.knots[0] < t0 < self.knots[-1]:
            raise ValidationError(
                "change point must lie strictly inside the knot range",
                field="changepoint",
                value=t0,
            )
        return int(np.searchsorted(self.knot_array, t0, side="left")) - 1


def build_basis(
    catalog: Catalog,
    domain: SmoothingDomain = SmoothingDomain.ORDINARY,
    reference: Optional[EtasParams] = None,
) -> SplineBasis:
    """
    Knots {S, event times, T} and, for transformed time, their images under
    the reference model's cumulative intensity.

    Raises:
        EmptyPeriodError: If the catalog has no in-window events
        ValidationError: If a transformed-time basis lacks a reference
    """
    if catalog.n_events == 0:
        raise EmptyPeriodError(
            "anomaly factors need at least one in-window event",
            operation="build_basis",
            period=catalog.window,
        )
    if catalog.window_end <= catalog.window_start:
        raise ValidationError("window has zero length", field="window", value=catalog.window)
    knots = np.unique(
        np.concatenate([[catalog.window_start], catalog.target_times, [catalog.window_end]])
    )
    event_knot = np.where(
        catalog.is_history, -1, np.searchsorted(knots, catalog.times, side="left")
    )
    tau = None
    if domain is SmoothingDomain.TRANSFORMED:
        if reference is None:
            raise ValidationError(
                "a reference model is required for transformed time", field="reference"
            )
        tau = tuple(float(v) for v in cumulative_curve(reference, catalog, knots))
    return SplineBasis(
        knots=tuple(float(k) for k in knots),
        domain=domain,
        tau_knots=tau,
        event_knot=tuple(int(i) for i in event_knot),
    )


def anomaly_value(
    model: AnomalyModel, basis: SplineBasis, which: str, t: Any
) -> np.ndarray | float:
    """
    q_mu(t) or q_K(t) by linear interpolation of the coefficients.

    Raises:
        ValidationError: If ``which`` is unknown or t lies outside the knots
    """
    if which not in (MU, K):
        raise ValidationError("must be 'mu' or 'k'", field="which", value=which)
    values = np.asarray(t, dtype=float)
    if np.any(values < basis.knots[0]) or np.any(values > basis.knots[-1]):
        raise ValidationError(
            f"t must lie within [{basis.knots[0]}, {basis.knots[-1]}]", field="t", value=t
        )
    coefficients = model.q_mu if which == MU else model.q_k
    result = np.interp(values, basis.knot_array, np.asarray(coefficients, dtype=float))
    return float(result) if np.ndim(result) == 0 else result


# ==================== Roughness penalties ====================


def roughness(coefficients: Any, basis: SplineBasis) -> float:
    """sum_i (q_{i+1} - q_i)^2 / gap_i on the basis's smoothing axis."""
    q = np.asarray(coefficients, dtype=float)
    if q.size != basis.size:
        raise ValidationError(
            f"expected {basis.size} coefficients", field="coefficients", value=q.size
        )
    return float(np.sum(np.diff(q) ** 2 / basis.smoothing_gaps))


def interval_weights(
    basis: SplineBasis,
    weight: float,
    changepoint: Optional[float] = None,
    changepoint_weight: float = 1e-5,
) -> np.ndarray:
    """Per-interval weights: ``weight`` except on the change-point interval."""
    omega = np.full(basis.size - 1, float(weight))
    index = basis.changepoint_interval(changepoint)
    if index is not None:
        omega[index] = changepoint_weight
    return omega


def weighted_penalty_matrix(basis: SplineBasis, omega: np.ndarray) -> np.ndarray:
    """Matrix P with q.P.q = sum_i omega_i (q_{i+1} - q_i)^2 / gap_i."""
    scale = np.asarray(omega, dtype=float) / basis.smoothing_gaps
    n = basis.size
    matrix = np.zeros((n, n))
    idx = np.arange(n - 1)
    matrix[idx, idx] += scale
    matrix[idx + 1, idx + 1] += scale
    matrix[idx, idx + 1] -= scale
    matrix[idx + 1, idx] -= scale
    return matrix


def weighted_roughness(
    coefficients: Any,
    basis: SplineBasis,
    weight: float,
    changepoint: Optional[float] = None,
    changepoint_weight: float = 1e-5,
) -> float:
    """Roughness with per-interval weights (the penalty term w * Phi)."""
    q = np.asarray(coefficients, dtype=float)
    omega = interval_weights(basis, weight, changepoint, changepoint_weight)
    return float(np.sum(omega * np.diff(q) ** 2 / basis.smoothing_gaps))


# ==================== Likelihood surfaces ====================


class LogLikelihoodSurface(Protocol):
    """A concave log-likelihood in a coefficient vector."""

    def value(self, z: np.ndarray) -> float: ...

    def gradient(self, z: np.ndarray) -> np.ndarray: ...

    def hessian(self, z: np.ndarray) -> np.ndarray: ...


class LinearIntensityLikelihood:
    """
    sum_i log((X z + h)_i) - lin . z - const.

    ``value`` is -inf wherever an intensity is not positive.
    """

    def __init__(self, design: np.ndarray, offset: np.ndarray, lin: np.ndarray, const: float):
        self.design = design
        self.offset = offset
        self.lin = lin
        self.const = float(const)

    def intensities(self, z: np.ndarray) -> np.ndarray:
        return self.design @ z + self.offset

    def value(self, z: np.ndarray) -> float:
        lam = self.intensities(z)
        if lam.size and not np.all(lam > 0):
            return -math.inf
        return float(np.sum(np.log(lam)) - self.lin @ z - self.const)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        return self.design.T @ (1.0 / self.intensities(z)) - self.lin

    def hessian(self, z: np.ndarray) -> np.ndarray:
        scaled = self.design / self.intensities(z)[:, None]
        return -(scaled.T @ scaled)


class QuadraticPenalty:
    """z.R.z + 2 z.r + r0; R is positive definite."""

    def __init__(self, matrix: np.ndarray, linear: np.ndarray, constant: float):
        self.matrix = matrix
        self.linear = linear
        self.constant = float(constant)

    def value(self, z: np.ndarray) -> float:
        return float(z @ self.matrix @ z + 2.0 * z @ self.linear + self.constant)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        return 2.0 * (self.matrix @ z + self.linear)

    def hessian(self) -> np.ndarray:
        return 2.0 * self.matrix


class NewtonResult(BaseModel):
    """Outcome of ``maximize_penalized``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    z: np.ndarray
    value: float
    iterations: int
    converged: bool
    gradient_norm: float
    active: int = 0


def maximize_penalized(
    surface: LogLikelihoodSurface,
    penalty: QuadraticPenalty,
    z0: np.ndarray,
    *,
    gtol: float = 1e-6,
    max_iter: int = 1000,
    nonnegative: bool = True,
) -> NewtonResult:
    """
    Maximize surface(z) - penalty(z) by projected Newton steps.

    Coordinates at zero whose gradient points outward are held at zero;
    the remaining ones take a Newton step with Armijo backtracking that
    keeps the objective finite. Converged when the projected gradient
    max-norm drops below ``gtol``.

    Raises:
        ConvergenceError: If the objective is not finite at the start
    """
    lower = 0.0 if nonnegative else -np.inf
    z = np.maximum(np.asarray(z0, dtype=float), lower)

    def objective(x: np.ndarray) -> float:
        return surface.value(x) - penalty.value(x)

    current = objective(z)
    if not np.isfinite(current):
        raise ConvergenceError(
            "penalized log-likelihood is not finite at the starting point",
            operation="map_estimate",
        )
    norm = math.inf
    iterations = 0
    converged = False
    penalty_hessian = penalty.hessian()

    for iterations in range(max_iter + 1):
        g = surface.gradient(z) - penalty.gradient(z)
        clamped = (z <= lower) & (g < 0)
        norm = float(np.max(np.abs(np.where(clamped, 0.0, g)))) if g.size else 0.0
        if norm < gtol:
            converged = True
            break
        if iterations == max_iter:
            break
        free = ~clamped
        h = -surface.hessian(z) + penalty_hessian
        h_free = h[np.ix_(free, free)]
        direction = np.zeros_like(z)
        try:
            direction[free] = linalg.cho_solve(linalg.cho_factor(h_free), g[free])
        except linalg.LinAlgError:
            direction[free] = linalg.lstsq(h_free, g[free])[0]

        step = 1.0
        while step > 1e-12:
            trial = np.maximum(z + step * direction, lower)
            value = objective(trial)
            if np.isfinite(value) and value >= current + 1e-4 * (g @ (trial - z)):
                break
            step *= 0.5
        else:
            break
        if np.array_equal(trial, z):
            break
        z, current = trial, value

    return NewtonResult(
        z=z,
        value=current,
        iterations=iterations,
        converged=converged,
        gradient_norm=norm,
        active=int(np.sum(z <= lower)) if nonnegative else 0,
    )


# ==================== Design ====================


class NsDesign:
    """
    Linear structure of the nonstationary log-likelihood for one catalog,
    basis and reference model.

    Built once (quadratic in the number of events) and reused for every
    restriction and hyperparameter setting.
    """

    def __init__(self, catalog: Catalog, basis: SplineBasis, reference: EtasParams) -> None:
        self.catalog = catalog
        self.basis = basis
        self.reference = reference
        n = basis.size
        n_targets = catalog.n_events
        in_window = ~catalog.is_history
        knot_of = np.asarray(basis.event_knot, dtype=int)

        g = trigger_matrix(catalog, reference)
        self.x_k = np.zeros((n, n_targets))
        np.add.at(self.x_k, knot_of[in_window], g[:, in_window].T)
        self.x_k = self.x_k.T
        self.offset = g[:, ~in_window].sum(axis=1)

        self.x_mu = np.zeros((n_targets, n))
        self.x_mu[np.arange(n_targets), basis.target_knot] = reference.mu

        integrals = event_integrals(catalog, reference, catalog.window_end)
        self.lin_k = np.zeros(n)
        np.add.at(self.lin_k, knot_of[in_window], integrals[in_window])
        self.lin_mu = reference.mu * basis.trapezoid_weights
        self.const = float(integrals[~in_window].sum())

    def log_likelihood(self, q_mu: Any, q_k: Any) -> float:
        """Log-likelihood at full coefficient vectors."""
        q_mu = np.asarray(q_mu, dtype=float)
        q_k = np.asarray(q_k, dtype=float)
        lam = self.x_mu @ q_mu + self.x_k @ q_k + self.offset
        if lam.size and not np.all(lam > 0):
            first = int(np.argmax(~(lam > 0)))
            raise DegenerateLikelihoodError(
                f"intensity vanishes at event t={self.catalog.target_times[first]}",
                operation="ns_log_likelihood",
            )
        return float(
            np.sum(np.log(lam)) - self.lin_mu @ q_mu - self.lin_k @ q_k - self.const
        )

    def restricted(
        self, restriction: Restriction, boundary_mu: float, boundary_k: float
    ) -> LinearIntensityLikelihood:
        """Likelihood in the free coefficients; the last knot is held at the boundary."""
        m = self.basis.size - 1
        mu_cols, mu_last = self.x_mu[:, :m], self.x_mu[:, m]
        k_cols, k_last = self.x_k[:, :m], self.x_k[:, m]
        if restriction is Restriction.FIX_QK:
            design = mu_cols
            offset = self.offset + mu_last * boundary_mu + self.x_k.sum(axis=1)
            lin = self.lin_mu[:m]
            const = self.const + self.lin_mu[m] * boundary_mu + self.lin_k.sum()
        elif restriction is Restriction.TIED:
            design = mu_cols + k_cols
            offset = self.offset + (mu_last + k_last) * boundary_mu
            lin = self.lin_mu[:m] + self.lin_k[:m]
            const = self.const + (self.lin_mu[m] + self.lin_k[m]) * boundary_mu
        else:
            design = np.hstack([mu_cols, k_cols])
            offset = self.offset + mu_last * boundary_mu + k_last * boundary_k
            lin = np.concatenate([self.lin_mu[:m], self.lin_k[:m]])
            const = self.const + self.lin_mu[m] * boundary_mu + self.lin_k[m] * boundary_k
        return LinearIntensityLikelihood(design, offset, lin, const)


def free_layout(restriction: Restriction, size: int) -> tuple[tuple[int, int], ...]:
    """(factor, knot) of each free coefficient; factor 0 is q_mu, 1 is q_K."""
    m = size - 1
    layout = [(0, i) for i in range(m)]
    if restriction is Restriction.FREE:
        layout += [(1, i) for i in range(m)]
    return tuple(layout)


def restricted_penalty(
    basis: SplineBasis,
    restriction: Restriction,
    penalty: PenaltyConfig,
    boundary_mu: float,
    boundary_k: float,
    changepoint: Optional[float] = None,
) -> QuadraticPenalty:
    """
    w_mu Phi_mu + w_K Phi_K as a quadratic in the free coefficients.

    Under TIED a single penalty with weight w_mu applies; under FIX_QK the
    productivity factor is flat and contributes nothing.
    """
    m = basis.size - 1

    def block(weight: float, boundary: float) -> tuple[np.ndarray, np.ndarray, float]:
        omega = interval_weights(basis, weight, changepoint, penalty.changepoint_weight)
        full = weighted_penalty_matrix(basis, omega)
        return full[:m, :m], boundary * full[:m, m], boundary**2 * full[m, m]

    r_mu, l_mu, c_mu = block(penalty.w_mu, boundary_mu)
    if restriction is not Restriction.FREE:
        return QuadraticPenalty(r_mu, l_mu, c_mu)
    r_k, l_k, c_k = block(penalty.w_k, boundary_k)
    return QuadraticPenalty(
        linalg.block_diag(r_mu, r_k), np.concatenate([l_mu, l_k]), c_mu + c_k
    )


def expand_coefficients(
    z: np.ndarray,
    restriction: Restriction,
    size: int,
    boundary_mu: float,
    boundary_k: float,
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Full (q_mu, q_k) vectors from the free coefficients and boundaries."""
    m = size - 1
    q_mu = tuple(float(v) for v in z[:m]) + (float(boundary_mu),)
    if restriction is Restriction.FIX_QK:
        q_k = tuple(1.0 for _ in range(size))
    elif restriction is Restriction.TIED:
        q_k = q_mu
    else:
        q_k = tuple(float(v) for v in z[m:]) + (float(boundary_k),)
    return q_mu, q_k


def compress_coefficients(model: AnomalyModel) -> np.ndarray:
    """Free coefficients of a model (inverse of ``expand_coefficients``)."""
    m = len(model.knots) - 1
    if model.restriction is Restriction.FREE:
        return np.concatenate([model.mu_coefficients[:m], model.k_coefficients[:m]])
    return model.mu_coefficients[:m].copy()


# ==================== Public operations ====================


def _design_for(
    model: AnomalyModel, basis: SplineBasis, catalog: Catalog
) -> NsDesign:
    if tuple(model.knots) != basis.knots:
        raise ValidationError("model knots do not match the basis", field="knots")
    return NsDesign(catalog, basis, model.reference)


def ns_log_likelihood(model: AnomalyModel, basis: SplineBasis, catalog: Catalog) -> float:
    """
    Log-likelihood of the modulated intensity.

    Raises:
        DegenerateLikelihoodError: If the intensity vanishes at an event
    """
    design = _design_for(model, basis, catalog)
    return design.log_likelihood(model.q_mu, model.q_k)


def penalty_terms(
    model: AnomalyModel, basis: SplineBasis, penalty: PenaltyConfig
) -> tuple[float, float]:
    """(w_mu Phi_mu, w_K Phi_K) including the change-point interval override."""
    phi_mu = weighted_roughness(
        model.q_mu, basis, penalty.w_mu, model.changepoint, penalty.changepoint_weight
    )
    if model.restriction is not Restriction.FREE:
        return phi_mu, 0.0
    phi_k = weighted_roughness(
        model.q_k, basis, penalty.w_k, model.changepoint, penalty.changepoint_weight
    )
    return phi_mu, phi_k


def penalized_loglik(
    model: AnomalyModel,
    basis: SplineBasis,
    catalog: Catalog,
    penalty: PenaltyConfig,
) -> float:
    """Q = ns_log_likelihood - w_mu Phi_mu - w_K Phi_K."""
    pen_mu, pen_k = penalty_terms(model, basis, penalty)
    return ns_log_likelihood(model, basis, catalog) - pen_mu - pen_k


class MapEstimate(BaseModel):
    """MAP coefficients at fixed hyperparameters."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: AnomalyModel
    coefficients: np.ndarray
    penalized_loglik: float
    loglik: float
    iterations: int
    converged: bool
    active_constraints: int = 0
    warnings: tuple[str, ...] = ()


def map_estimate(
    catalog: Catalog,
    restriction: Restriction,
    smoothing_domain: SmoothingDomain,
    penalty: PenaltyConfig,
    reference: EtasParams,
    *,
    changepoint: Optional[float] = None,
    boundary_mu: float = 1.0,
    boundary_k: float = 1.0,
    basis: Optional[SplineBasis] = None,
    design: Optional[NsDesign] = None,
    init: Optional[np.ndarray] = None,
) -> MapEstimate:
    """
    Maximize the penalized log-likelihood over the free coefficients.

    The iteration starts from the reference model (all coefficients 1)
    unless ``init`` is given. Coefficients are kept nonnegative; coordinates
    held at zero are counted in ``active_constraints``.

    Raises:
        ValidationError: If fewer than two events are available
    """
    settings = get_settings()
    label = model_label(restriction, smoothing_domain, changepoint is not None)
    log = get_fit_logger(label, "map")
    if catalog.n_events < 2:
        raise ValidationError(
            "at least two in-window events are required", field="catalog", value=catalog.n_events
        )
    if basis is None:
        basis = build_basis(catalog, smoothing_domain, reference)
    if design is None:
        design = NsDesign(catalog, basis, reference)
    if restriction is Restriction.TIED:
        boundary_k = boundary_mu
    if restriction is Restriction.FIX_QK:
        boundary_k = 1.0

    surface = design.restricted(restriction, boundary_mu, boundary_k)
    quadratic = restricted_penalty(
        basis, restriction, penalty, boundary_mu, boundary_k, changepoint
    )
    width = len(free_layout(restriction, basis.size))
    z0 = np.ones(width) if init is None else np.asarray(init, dtype=float)
    result = maximize_penalized(
        surface, quadratic, z0, gtol=settings.map_gtol, max_iter=settings.map_max_iter
    )

    warnings = []
    if not result.converged:
        warnings.append(
            f"MAP not converged after {result.iterations} iterations "
            f"(projected gradient {result.gradient_norm:.3g})"
        )
    if result.active:
        warnings.append(f"{result.active} coefficient(s) held at zero")
    for message in warnings:
        log.debug(message)

    q_mu, q_k = expand_coefficients(result.z, restriction, basis.size, boundary_mu, boundary_k)
    model = AnomalyModel(
        knots=basis.knots,
        q_mu=q_mu,
        q_k=q_k,
        restriction=restriction,
        smoothing_domain=smoothing_domain,
        changepoint=changepoint,
        reference=reference,
    )
    return MapEstimate(
        model=model,
        coefficients=result.z,
        penalized_loglik=result.value,
        loglik=surface.value(result.z),
        iterations=result.iterations,
        converged=result.converged,
        active_constraints=result.active,
        warnings=tuple(warnings),
    )


# ==================== Traces and residuals ====================


def _integrated_factor(basis: SplineBasis, coefficients: Any, times: np.ndarray) -> np.ndarray:
    """int_S^t q(s) ds for the broken line through the coefficients."""
    q = np.asarray(coefficients, dtype=float)
    knots = basis.knot_array
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (q[:-1] + q[1:]) * basis.gaps)])
    interval = np.clip(np.searchsorted(knots, times, side="right") - 1, 0, basis.size - 2)
    left = knots[interval]
    value_at = np.interp(times, knots, q)
    return cumulative[interval] + 0.5 * (q[interval] + value_at) * (times - left)


def intensity_trace(
    model: AnomalyModel, basis: SplineBasis, catalog: Catalog, times: Any
) -> dict[str, np.ndarray]:
    """
    mu(t) = mu q_mu(t), K0(t) = K0 q_K(t) and lambda_q(t) at the given times.
    """
    times = np.asarray(times, dtype=float)
    ref = model.reference
    q_mu = np.interp(times, basis.knot_array, model.mu_coefficients)
    q_k = np.interp(times, basis.knot_array, model.k_coefficients)
    sums = trigger_sums(
        catalog.times,
        catalog.excess_magnitudes,
        times,
        ref.c,
        ref.alpha,
        ref.p,
        weights=basis.event_factors(model.q_k),
    )
    return {
        "t": times,
        "mu": ref.mu * q_mu,
        "k0": ref.k0 * q_k,
        "lambda": ref.mu * q_mu + ref.k0 * sums.total,
    }


def ns_cumulative_curve(
    model: AnomalyModel, basis: SplineBasis, catalog: Catalog, times: Any
) -> np.ndarray:
    """Lambda_q(t), the expected count in [S, t] under the modulated model."""
    times = np.asarray(times, dtype=float)
    background = model.reference.mu * _integrated_factor(basis, model.q_mu, times)
    triggered = triggered_curve(
        model.reference, catalog, times, weights=basis.event_factors(model.q_k)
    )
    return background + triggered


def ns_transform_times(
    model: AnomalyModel, basis: SplineBasis, catalog: Catalog
) -> ResidualSequence:
    """
    Event times mapped through Lambda_q.

    Raises:
        ValidationError: If the catalog does not yield the model's knots
    """
    if tuple(model.knots) != basis.knots:
        raise ValidationError("model knots do not match the catalog", field="knots")
    targets = catalog.target_times
    values = ns_cumulative_curve(
        model, basis, catalog, np.concatenate([targets, [catalog.window_end]])
    )
    return residuals_from_curve(targets, values)
