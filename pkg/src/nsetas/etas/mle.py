"""
Maximum-likelihood fitting of stationary ETAS parameters.

The optimizer is L-BFGS-B on the analytic gradient. mu, K0 and c are
optimized as logarithms, alpha and p directly with positivity bounds.
Any subset of the five parameters can be held fixed at its initial value;
fixing p = 1.0 or fixing (c, alpha, p) at a reference model are both
expressed through the fix mask.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from typing import Any, Optional, Union

import numpy as np
from scipy import linalg, optimize

from nsetas.config.settings import get_settings
from nsetas.core.exceptions import DegenerateLikelihoodError, EmptyPeriodError
from nsetas.core.logging import get_fit_logger
from nsetas.etas.intensity import EtasLikelihood
from nsetas.models.catalog import Catalog
from nsetas.models.etas import (
    PARAM_NAMES,
    EtasParams,
    FitResult,
    parse_fixed,
    relative_probability,
)

__all__ = [
    "aic_of",
    "default_init",
    "fit_mle",
    "fit_mle_multistart",
    "relative_probability",
    "standard_errors",
]

FixMask = Union[Iterable[str], Mapping[str, bool], None]

LOG_SCALED = (True, True, True, False, False)
LOWER_BOUNDS = (0.0, 0.0, 0.0, 0.0, 1e-6)
# log-space box for mu, K0, c; wide enough to report runaway fits verbatim
LOG_BOX = (-50.0, 50.0)
LOG_FLOOR = 1e-12
HESSIAN_STEP = 1e-4


def aic_of(loglik: float, k: int) -> float:
    """Akaike information criterion -2 loglik + 2k."""
    return -2.0 * loglik + 2 * k


def default_init(catalog: Catalog) -> EtasParams:
    """Interior starting point scaled to the catalog's event rate."""
    duration = catalog.duration
    mu = catalog.n_events / (2.0 * duration) if duration > 0 else 1.0
    return EtasParams(mu=max(mu, LOG_FLOOR), k0=0.05, c=0.01, alpha=1.0, p=1.1)


class _Scaled:
    """Map between natural parameters and optimizer coordinates."""

    def __init__(self, init: np.ndarray, free: np.ndarray) -> None:
        self.init = init
        self.free = free

    def to_z(self, theta: np.ndarray) -> np.ndarray:
        z = []
        for i in np.flatnonzero(self.free):
            z.append(np.log(max(theta[i], LOG_FLOOR)) if LOG_SCALED[i] else theta[i])
        return np.array(z, dtype=float)

    def to_theta(self, z: np.ndarray) -> np.ndarray:
        theta = self.init.copy()
        for value, i in zip(z, np.flatnonzero(self.free)):
            theta[i] = np.exp(value) if LOG_SCALED[i] else value
        return theta

    def chain(self, theta: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        """Gradient in optimizer coordinates."""
        idx = np.flatnonzero(self.free)
        scale = np.array([theta[i] if LOG_SCALED[i] else 1.0 for i in idx])
        return gradient[idx] * scale

    def bounds(self) -> list[tuple[Optional[float], Optional[float]]]:
        return [
            LOG_BOX if LOG_SCALED[i] else (LOWER_BOUNDS[i], None)
            for i in np.flatnonzero(self.free)
        ]


def _projected_gradient_norm(
    z: np.ndarray, g: np.ndarray, bounds: list[tuple[Optional[float], Optional[float]]]
) -> float:
    projected = g.copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and z[i] <= lo and g[i] > 0:
            projected[i] = 0.0
        if hi is not None and z[i] >= hi and g[i] < 0:
            projected[i] = 0.0
    return float(np.max(np.abs(projected))) if projected.size else 0.0


def fit_mle(
    catalog: Catalog,
    init: Optional[EtasParams] = None,
    fixed: FixMask = None,
    *,
    label: str = "etas",
) -> FitResult:
    """
    Maximize the ETAS log-likelihood over the free parameters.

    Args:
        catalog: Catalog with at least one in-window event
        init: Starting point; fixed parameters are held at these values
            (default: ``default_init(catalog)``)
        fixed: Names of parameters to hold fixed
        label: Model label used in log messages

    Returns:
        FitResult; ``converged`` is False when the projected gradient
        max-norm did not fall below ``mle_gtol`` within ``mle_max_iter``

    Raises:
        EmptyPeriodError: If the catalog has no in-window events
        DegenerateLikelihoodError: If the likelihood vanishes at ``init``
    """
    settings = get_settings()
    log = get_fit_logger(label, "mle")
    if catalog.n_events == 0:
        raise EmptyPeriodError(
            f"no events in [{catalog.window_start}, {catalog.window_end}]",
            model=label,
            operation="fit_mle",
            period=catalog.window,
        )

    init = init if init is not None else default_init(catalog)
    fixed_names = parse_fixed(fixed)
    free = np.array([name not in fixed_names for name in PARAM_NAMES])
    likelihood = EtasLikelihood(catalog)
    theta0 = init.as_array()
    try:
        loglik0 = likelihood.value(theta0)
    except DegenerateLikelihoodError as e:
        e.model = label
        raise

    if not free.any():
        log.debug("all parameters fixed; evaluating the likelihood only")
        return _result(catalog, init, fixed_names, loglik0, {}, True, 0, [])

    scaled = _Scaled(theta0, free)
    bounds = scaled.bounds()
    z0 = np.clip(
        scaled.to_z(theta0),
        [b[0] if b[0] is not None else -np.inf for b in bounds],
        [b[1] if b[1] is not None else np.inf for b in bounds],
    )

    def objective(z: np.ndarray) -> tuple[float, np.ndarray]:
        theta = scaled.to_theta(z)
        try:
            value, gradient = likelihood.value_and_gradient(theta)
        except DegenerateLikelihoodError:
            return np.inf, np.zeros_like(z)
        return -value, -scaled.chain(theta, gradient)

    result = optimize.minimize(
        objective,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "gtol": settings.mle_gtol * 1e-2,
            "ftol": 1e-15,
            "maxiter": settings.mle_max_iter,
            "maxcor": 20,
        },
    )
    theta = scaled.to_theta(result.x)
    warnings: list[str] = []

    try:
        loglik, gradient = likelihood.value_and_gradient(theta)
        grad_norm = _projected_gradient_norm(
            result.x, -scaled.chain(theta, gradient), bounds
        )
    except DegenerateLikelihoodError:
        loglik, grad_norm = -np.inf, np.inf

    if not loglik >= loglik0:
        warnings.append("optimizer did not improve on the initial point; returning init")
        theta, loglik = theta0, loglik0
        grad_norm = np.inf

    converged = grad_norm < settings.mle_gtol
    if not converged:
        warnings.append(
            f"not converged after {result.nit} iterations "
            f"(projected gradient {grad_norm:.3g}): {result.message}"
        )

    params = EtasParams.from_array(theta)
    errors = standard_errors(catalog, params, fixed_names, warnings=warnings)
    warnings.extend(_diagnose(params, errors, settings.runaway_threshold))
    for message in warnings:
        log.warning(message)

    fit = _result(
        catalog, params, fixed_names, loglik, errors, converged, int(result.nit), warnings
    )
    log.info(
        f"loglik={fit.loglik:.4f} AIC={fit.aic:.2f} k={fit.k} "
        f"iterations={fit.iterations} converged={fit.converged}"
    )
    return fit


def _result(
    catalog: Catalog,
    params: EtasParams,
    fixed: tuple[str, ...],
    loglik: float,
    errors: dict[str, Optional[float]],
    converged: bool,
    iterations: int,
    warnings: list[str],
) -> FitResult:
    k = len(PARAM_NAMES) - len(fixed)
    return FitResult(
        params=params,
        fixed=fixed,
        loglik=float(loglik),
        aic=aic_of(float(loglik), k),
        std_errors=errors,
        k=k,
        converged=converged,
        iterations=iterations,
        n_events=catalog.n_events,
        window=catalog.window,
        warnings=tuple(warnings),
    )


def _diagnose(
    params: EtasParams, errors: dict[str, Optional[float]], runaway: float
) -> list[str]:
    notes = []
    se_alpha = errors.get("alpha")
    if se_alpha is not None and se_alpha > params.alpha:
        notes.append(
            f"alpha standard error {se_alpha:.3g} exceeds the estimate {params.alpha:.3g}; "
            "alpha and K0 trade off on a narrow magnitude range"
        )
    big = [
        name for name in ("mu", "k0", "c") if getattr(params, name) > runaway
    ]
    if params.p > 10.0:
        big.append("p")
    if big:
        notes.append(f"divergent estimate for {', '.join(big)}; reported verbatim")
    return notes


def standard_errors(
    catalog: Catalog,
    params: EtasParams,
    fixed: FixMask = None,
    *,
    warnings: Optional[list[str]] = None,
) -> dict[str, Optional[float]]:
    """
    Standard errors from the inverse observed information of the free parameters.

    The Hessian is the central difference of the analytic gradient (one-sided
    next to a lower bound). When it is not negative definite every error is
    None and a diagnostic is appended to ``warnings``.
    """
    fixed_names = parse_fixed(fixed)
    idx = [i for i, name in enumerate(PARAM_NAMES) if name not in fixed_names]
    if not idx:
        return {}
    likelihood = EtasLikelihood(catalog)
    theta = params.as_array()
    information = np.zeros((len(idx), len(idx)))

    try:
        _, base = likelihood.value_and_gradient(theta)
        for col, i in enumerate(idx):
            h = HESSIAN_STEP * max(abs(theta[i]), 1e-3)
            up = theta.copy()
            up[i] += h
            _, g_up = likelihood.value_and_gradient(up)
            if PARAM_NAMES[i] == "alpha" or theta[i] - h > LOWER_BOUNDS[i]:
                down = theta.copy()
                down[i] -= h
                _, g_down = likelihood.value_and_gradient(down)
                column = (g_up - g_down) / (2 * h)
            else:
                column = (g_up - base) / h
            information[:, col] = -column[idx]
    except DegenerateLikelihoodError as e:
        if warnings is not None:
            warnings.append(f"standard errors unavailable: {e.message}")
        return {PARAM_NAMES[i]: None for i in idx}

    information = 0.5 * (information + information.T)
    try:
        factor = linalg.cho_factor(information, lower=True)
        covariance = linalg.cho_solve(factor, np.eye(len(idx)))
    except linalg.LinAlgError:
        if warnings is not None:
            warnings.append("observed information is not positive definite; standard errors unavailable")
        return {PARAM_NAMES[i]: None for i in idx}
    diagonal = np.diag(covariance)
    return {
        PARAM_NAMES[i]: float(np.sqrt(v)) if v >= 0 else None
        for i, v in zip(idx, diagonal)
    }


def fit_mle_multistart(
    catalog: Catalog,
    init: Optional[EtasParams] = None,
    fixed: FixMask = None,
    *,
    restarts: int = 0,
    seed: int = 0,
    label: str = "etas",
) -> FitResult:
    """
    Refit from log-normally perturbed starting points and keep the best.

    Perturbations multiply each free parameter by exp(s Z) with s =
    ``mle_restart_scale`` and Z standard normal drawn from a generator
    seeded with ``seed``; the unperturbed fit is always included.
    """
    best = fit_mle(catalog, init, fixed, label=label)
    if restarts <= 0:
        return best
    fixed_names = parse_fixed(fixed)
    scale = get_settings().mle_restart_scale
    rng = np.random.default_rng(seed)
    start = (init if init is not None else default_init(catalog)).as_array()
    free = np.array([name not in fixed_names for name in PARAM_NAMES])
    log = get_fit_logger(label, "mle")

    for attempt in range(1, restarts + 1):
        factors = np.exp(scale * rng.standard_normal(len(PARAM_NAMES)))
        theta = np.where(free, start * factors, start)
        try:
            candidate = fit_mle(catalog, EtasParams.from_array(theta), fixed_names, label=label)
        except DegenerateLikelihoodError as e:
            log.warning(f"restart {attempt} skipped: {e.message}")
            continue
        if candidate.loglik > best.loglik:
            log.info(f"restart {attempt} improved loglik to {candidate.loglik:.4f}")
            best = candidate
    return best


def fit_summary(fit: FitResult) -> dict[str, Any]:
    """Flat row for console tables."""
    row: dict[str, Any] = {name: getattr(fit.params, name) for name in PARAM_NAMES}
    row.update({"loglik": fit.loglik, "aic": fit.aic, "converged": fit.converged})
    return row
