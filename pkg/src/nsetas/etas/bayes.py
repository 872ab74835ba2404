"""
Type-II maximum likelihood for anomaly-factor models.

The roughness penalty is read as a Gaussian prior on the free coefficients
(the boundary coefficients are hyperparameters). The marginal likelihood of
the penalty weights and boundaries is approximated by Laplace's method at
the MAP:

    log Psi = Q(z_hat) + 1/2 log det(2 R) - 1/2 log det(H)

where R is the prior quadratic form and H the negative Hessian of Q.
The 2 pi terms of prior and posterior cancel. Hyperparameters are searched
by Nelder-Mead in log coordinates and models are ranked by ABIC relative
to a baseline with very heavy weights on the same restriction and domain.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Any, Optional

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg, optimize

from nsetas.config.settings import get_settings
from nsetas.core.exceptions import (
    ConvergenceError,
    DegenerateLikelihoodError,
    LaplaceError,
    ModelSelectionError,
    ValidationError,
)
from nsetas.core.logging import get_fit_logger, get_logger
from nsetas.etas.nonstationary import (
    LogLikelihoodSurface,
    NsDesign,
    QuadraticPenalty,
    SplineBasis,
    build_basis,
    compress_coefficients,
    free_layout,
    map_estimate,
    maximize_penalized,
    restricted_penalty,
    weighted_penalty_matrix,
)
from nsetas.models.anomaly import (
    BayesFit,
    Hyperparams,
    Restriction,
    SmoothingDomain,
    model_label,
    parse_label,
)
from nsetas.models.catalog import Catalog
from nsetas.models.etas import EtasParams, relative_probability

logger = get_logger(__name__)

WEIGHT_SPAN = math.log(1e6)
BOUNDARY_SPAN = 0.5
BOUNDARY_FLOOR = 1e-3


def prior_penalty_matrix(basis: SplineBasis) -> np.ndarray:
    """Unweighted roughness matrix: q.Sigma.q equals roughness(q, basis)."""
    return weighted_penalty_matrix(basis, np.ones(basis.size - 1))


def hyperparameter_count(restriction: Restriction, count_all_weights: bool = False) -> int:
    """
    Hyperparameters entering ABIC.

    Only active ones are counted by default: (w_mu, boundary) for fix_qk and
    tied, both pairs for free. ``count_all_weights`` counts every weight, active or not: 4 and 8.
    """
    if count_all_weights:
        return 8 if restriction is Restriction.FREE else 4
    return 4 if restriction is Restriction.FREE else 2


def _log_det(factor: tuple[np.ndarray, bool]) -> float:
    return float(2.0 * np.sum(np.log(np.diag(factor[0]))))


def laplace_evidence(
    surface: LogLikelihoodSurface, penalty: QuadraticPenalty, z: np.ndarray
) -> tuple[float, np.ndarray, float]:
    """
    Laplace log marginal at a given maximizer.

    Returns:
        (log marginal, negative Hessian H, log det H)

    Raises:
        LaplaceError: If H or the prior precision is not positive definite
    """
    prior = penalty.hessian()
    hessian = -surface.hessian(z) + prior
    try:
        prior_log_det = _log_det(linalg.cho_factor(prior))
        hessian_log_det = _log_det(linalg.cho_factor(hessian))
    except linalg.LinAlgError as e:
        raise LaplaceError(
            "Hessian is not positive definite at the MAP", operation="log_marginal"
        ) from e
    value = surface.value(z) - penalty.value(z)
    return value + 0.5 * prior_log_det - 0.5 * hessian_log_det, hessian, hessian_log_det


def log_marginal_from_surface(
    surface: LogLikelihoodSurface,
    penalty: QuadraticPenalty,
    z0: np.ndarray,
    *,
    nonnegative: bool = True,
) -> float:
    """Maximize a penalized surface and return its Laplace log marginal."""
    settings = get_settings()
    result = maximize_penalized(
        surface,
        penalty,
        z0,
        gtol=settings.map_gtol,
        max_iter=settings.map_max_iter,
        nonnegative=nonnegative,
    )
    return laplace_evidence(surface, penalty, result.z)[0]


def _normalize_hyper(restriction: Restriction, hyper: Hyperparams) -> Hyperparams:
    if restriction is Restriction.FIX_QK:
        return hyper.model_copy(update={"q_k_boundary": 1.0})
    if restriction is Restriction.TIED:
        return hyper.model_copy(update={"q_k_boundary": hyper.q_mu_boundary})
    return hyper


def pointwise_errors(
    knots: Sequence[float],
    covariance: np.ndarray,
    free_index: Sequence[tuple[int, int]],
    times: Any,
    *,
    tied: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Standard errors sqrt(c(t, t)) of q_mu and q_K at the given times.

    c(u, v) = sum_ij F_i(u) h^ij F_j(v) over the free coefficients of one
    factor; fixed coefficients carry no variance. Under ``tied`` the single
    factor serves both traces.
    """
    basis = SplineBasis(knots=tuple(float(k) for k in knots))
    tents = basis.tent_matrix(times)
    layout = np.asarray(free_index, dtype=int).reshape(-1, 2)
    out = []
    for factor in (0, 1):
        rows = np.flatnonzero(layout[:, 0] == factor)
        if rows.size == 0:
            out.append(np.zeros(tents.shape[0]))
            continue
        f = tents[:, layout[rows, 1]]
        block = covariance[np.ix_(rows, rows)]
        variance = np.einsum("ri,ij,rj->r", f, block, f)
        out.append(np.sqrt(np.maximum(variance, 0.0)))
    eps_mu, eps_k = out
    if tied:
        eps_k = eps_mu.copy()
    return eps_mu, eps_k


def error_bounds(fit: BayesFit, times: Any) -> tuple[np.ndarray, np.ndarray]:
    """
    epsilon_mu(t), epsilon_K(t) of a fit at arbitrary times in the knot range.

    Raises:
        LaplaceError: If the fit carries no posterior covariance
        ValidationError: If a time lies outside the knot range
    """
    if fit.covariance is None or fit.free_index is None:
        raise LaplaceError(
            "fit has no posterior covariance (was it loaded from JSON?)",
            model=fit.label,
            operation="error_bounds",
        )
    values = np.atleast_1d(np.asarray(times, dtype=float))
    knots = fit.map.knots
    if np.any(values < knots[0]) or np.any(values > knots[-1]):
        raise ValidationError(
            f"times must lie within [{knots[0]}, {knots[-1]}]", field="times"
        )
    return pointwise_errors(
        knots,
        fit.covariance,
        fit.free_index,
        values,
        tied=fit.restriction is Restriction.TIED,
    )


def laplace_fit(
    catalog: Catalog,
    restriction: Restriction,
    smoothing_domain: SmoothingDomain,
    hyper: Hyperparams,
    reference: EtasParams,
    *,
    changepoint: Optional[float] = None,
    changepoint_weight: Optional[float] = None,
    count_all_weights: bool = False,
    basis: Optional[SplineBasis] = None,
    design: Optional[NsDesign] = None,
    init: Optional[np.ndarray] = None,
    baseline: bool = False,
) -> BayesFit:
    """
    MAP estimate and Laplace marginal likelihood at fixed hyperparameters.

    Raises:
        LaplaceError: If the negative Hessian is not positive definite
    """
    settings = get_settings()
    cp_weight = settings.changepoint_weight if changepoint_weight is None else changepoint_weight
    hyper = _normalize_hyper(restriction, hyper)
    if basis is None:
        basis = build_basis(catalog, smoothing_domain, reference)
    if design is None:
        design = NsDesign(catalog, basis, reference)
    penalty = hyper.penalty(cp_weight)

    estimate = map_estimate(
        catalog,
        restriction,
        smoothing_domain,
        penalty,
        reference,
        changepoint=changepoint,
        boundary_mu=hyper.q_mu_boundary,
        boundary_k=hyper.q_k_boundary,
        basis=basis,
        design=design,
        init=init,
    )
    surface = design.restricted(restriction, hyper.q_mu_boundary, hyper.q_k_boundary)
    quadratic = restricted_penalty(
        basis, restriction, penalty, hyper.q_mu_boundary, hyper.q_k_boundary, changepoint
    )
    value, hessian, log_det = laplace_evidence(surface, quadratic, estimate.coefficients)
    covariance = linalg.cho_solve(linalg.cho_factor(hessian), np.eye(hessian.shape[0]))

    layout = free_layout(restriction, basis.size)
    m = basis.size - 1
    log_det_mu = _log_det(linalg.cho_factor(hessian[:m, :m]))
    log_det_k = (
        _log_det(linalg.cho_factor(hessian[m:, m:])) if restriction is Restriction.FREE else None
    )
    eps_mu, eps_k = pointwise_errors(
        basis.knots, covariance, layout, basis.knot_array, tied=restriction is Restriction.TIED
    )

    warnings = list(estimate.warnings)
    if estimate.active_constraints:
        warnings.append("Laplace approximation taken at a boundary of the nonnegative orthant")
    count = hyperparameter_count(restriction, count_all_weights)
    return BayesFit(
        map=estimate.model,
        hyper=hyper,
        changepoint_weight=cp_weight,
        log_marginal=value,
        abic=abic_value(value, count),
        hyperparameter_count=count,
        penalized_loglik=estimate.penalized_loglik,
        loglik=estimate.loglik,
        error_mu=tuple(float(e) for e in eps_mu),
        error_k=tuple(float(e) for e in eps_k),
        hessian_log_det=log_det,
        hessian_log_det_mu=log_det_mu,
        hessian_log_det_k=log_det_k,
        active_constraints=estimate.active_constraints,
        converged=estimate.converged,
        baseline=baseline,
        warnings=tuple(warnings),
        covariance=covariance,
        free_index=layout,
    )


def log_marginal(
    catalog: Catalog,
    restriction: Restriction,
    smoothing_domain: SmoothingDomain,
    hyper: Hyperparams,
    reference: EtasParams,
    *,
    changepoint: Optional[float] = None,
    changepoint_weight: Optional[float] = None,
) -> float:
    """Laplace approximation of the log marginal likelihood of ``hyper``."""
    return laplace_fit(
        catalog,
        restriction,
        smoothing_domain,
        hyper,
        reference,
        changepoint=changepoint,
        changepoint_weight=changepoint_weight,
    ).log_marginal


def abic_value(log_marginal_value: float, count: int) -> float:
    return -2.0 * log_marginal_value + 2.0 * count


def abic_of(fit: BayesFit) -> float:
    return fit.abic


def delta_abic(fit: BayesFit, baseline: BayesFit) -> float:
    """
    ABIC - ABIC0 against a heavy-weight baseline of the same configuration.

    Raises:
        ModelSelectionError: If restriction, domain, change point or knots differ
    """
    mismatched = [
        name
        for name, a, b in (
            ("restriction", fit.restriction, baseline.restriction),
            ("smoothing_domain", fit.smoothing_domain, baseline.smoothing_domain),
            ("changepoint", fit.map.changepoint, baseline.map.changepoint),
            ("knots", fit.map.knots, baseline.map.knots),
        )
        if a != b
    ]
    if mismatched:
        raise ModelSelectionError(
            f"baseline does not match the fit ({', '.join(mismatched)})",
            details={"fit": fit.label, "baseline": baseline.label},
        )
    return fit.abic - baseline.abic


class _Search:
    """Log-coordinate Nelder-Mead over the active hyperparameters."""

    def __init__(
        self,
        restriction: Restriction,
        init: Hyperparams,
        fixed_weight: Optional[float],
    ) -> None:
        self.restriction = restriction
        self.fixed_weight = fixed_weight
        self.free_k = restriction is Restriction.FREE
        weights = [] if fixed_weight is not None else [init.w_mu] + ([init.w_k] if self.free_k else [])
        boundaries = [init.q_mu_boundary] + ([init.q_k_boundary] if self.free_k else [])
        self.n_weights = len(weights)
        self.x0 = np.log(np.maximum(np.asarray(weights + boundaries, dtype=float), BOUNDARY_FLOOR))
        self.spans = np.array(
            [WEIGHT_SPAN] * self.n_weights + [BOUNDARY_SPAN] * len(boundaries)
        )

    def simplex(self, center: np.ndarray, scale: float = 1.0) -> np.ndarray:
        vertices = [center]
        for i, span in enumerate(self.spans):
            vertex = center.copy()
            vertex[i] += scale * span
            vertices.append(vertex)
        return np.array(vertices)

    def hyper(self, x: np.ndarray) -> Hyperparams:
        values = np.exp(x)
        if self.fixed_weight is not None:
            w_mu = w_k = self.fixed_weight
        else:
            w_mu = float(values[0])
            w_k = float(values[1]) if self.free_k else w_mu
        b = values[self.n_weights :]
        b_mu = float(b[0])
        b_k = float(b[1]) if self.free_k else b_mu
        return Hyperparams(w_mu=w_mu, w_k=w_k, q_mu_boundary=b_mu, q_k_boundary=b_k)


def optimize_hyperparams(
    catalog: Catalog,
    restriction: Restriction,
    smoothing_domain: SmoothingDomain,
    reference: EtasParams,
    *,
    init: Optional[Hyperparams] = None,
    changepoint: Optional[float] = None,
    changepoint_weight: Optional[float] = None,
    fixed_weight: Optional[float] = None,
    count_all_weights: bool = False,
    basis: Optional[SplineBasis] = None,
    design: Optional[NsDesign] = None,
) -> BayesFit:
    """
    Type-II maximum likelihood over penalty weights and boundary coefficients.

    Nelder-Mead runs in log coordinates from an initial simplex spanning
    weights 1e-2 to 1e4. A search that hits its iteration cap restarts once
    from a tighter simplex around its best point and is flagged if it fails
    again. With ``fixed_weight`` only the boundaries are searched (used for
    the heavy-weight baseline).
    """
    settings = get_settings()
    label = model_label(restriction, smoothing_domain, changepoint is not None)
    log = get_fit_logger(label, "hyper")
    if init is None:
        init = Hyperparams(w_mu=1e-2, w_k=1e-2)
    if basis is None:
        basis = build_basis(catalog, smoothing_domain, reference)
    if design is None:
        design = NsDesign(catalog, basis, reference)

    search = _Search(restriction, init, fixed_weight)
    fits: dict[bytes, BayesFit] = {}
    warm: list[Optional[np.ndarray]] = [None]

    def objective(x: np.ndarray) -> float:
        key = np.asarray(x, dtype=float).tobytes()
        if key in fits:
            return -fits[key].log_marginal
        try:
            fit = laplace_fit(
                catalog,
                restriction,
                smoothing_domain,
                search.hyper(x),
                reference,
                changepoint=changepoint,
                changepoint_weight=changepoint_weight,
                count_all_weights=count_all_weights,
                basis=basis,
                design=design,
                init=warm[0],
                baseline=fixed_weight is not None,
            )
        except (LaplaceError, ConvergenceError, DegenerateLikelihoodError) as e:
            log.debug(f"hyperparameters {np.exp(x)} rejected: {e}")
            return math.inf
        fits[key] = fit
        warm[0] = compress_coefficients(fit.map)
        return -fit.log_marginal

    options = {
        "xatol": settings.hyper_xatol,
        "fatol": settings.hyper_fatol,
        "maxiter": settings.hyper_max_iter,
    }
    result = optimize.minimize(
        objective,
        search.x0,
        method="Nelder-Mead",
        options={**options, "initial_simplex": search.simplex(search.x0)},
    )
    warnings = []
    converged = bool(result.success)
    if not converged:
        log.info("hyperparameter search stagnated, restarting once")
        result = optimize.minimize(
            objective,
            result.x,
            method="Nelder-Mead",
            options={**options, "initial_simplex": search.simplex(result.x, 0.5)},
        )
        converged = bool(result.success)
        if not converged:
            warnings.append(f"hyperparameter search did not converge: {result.message}")

    key = np.asarray(result.x, dtype=float).tobytes()
    best = fits.get(key) or min(fits.values(), key=lambda f: f.abic, default=None)
    if best is None:
        raise ConvergenceError(
            "no hyperparameter setting gave a valid Laplace approximation",
            model=label,
            operation="optimize_hyperparams",
        )
    for message in warnings:
        log.warning(message)
    log.info(
        f"ABIC={best.abic:.2f} w_mu={best.hyper.w_mu:.3g} w_k={best.hyper.w_k:.3g} "
        f"after {len(fits)} evaluations"
    )
    return best.model_copy(
        update={
            "converged": converged and best.converged,
            "evaluations": len(fits),
            "warnings": best.warnings + tuple(warnings),
        }
    )


def heavy_baseline(
    catalog: Catalog,
    restriction: Restriction,
    smoothing_domain: SmoothingDomain,
    reference: EtasParams,
    *,
    changepoint: Optional[float] = None,
    changepoint_weight: Optional[float] = None,
    count_all_weights: bool = False,
    basis: Optional[SplineBasis] = None,
    design: Optional[NsDesign] = None,
) -> BayesFit:
    """Near-flat baseline: both weights at ``heavy_weight``, boundaries optimized."""
    return optimize_hyperparams(
        catalog,
        restriction,
        smoothing_domain,
        reference,
        init=Hyperparams(w_mu=1.0, w_k=1.0),
        changepoint=changepoint,
        changepoint_weight=changepoint_weight,
        fixed_weight=get_settings().heavy_weight,
        count_all_weights=count_all_weights,
        basis=basis,
        design=design,
    )


def fit_configuration(
    catalog: Catalog,
    label: str,
    reference: EtasParams,
    *,
    changepoint: Optional[float] = None,
    changepoint_weight: Optional[float] = None,
    count_all_weights: bool = False,
    design: Optional[NsDesign] = None,
) -> tuple[BayesFit, BayesFit]:
    """
    Optimized fit and heavy-weight baseline for one labelled configuration.

    The returned fit carries its ΔABIC. When the baseline scores better the
    baseline's hyperparameters are adopted, so ΔABIC is never positive.

    Raises:
        ValidationError: If a primed label is requested without a change point
    """
    restriction, domain, with_cp = parse_label(label)
    if with_cp and changepoint is None:
        raise ValidationError(f"model {label} needs a change point", field="changepoint")
    t0 = changepoint if with_cp else None
    basis = build_basis(catalog, domain, reference)
    if design is None:
        design = NsDesign(catalog, basis, reference)
    options: dict[str, Any] = {
        "changepoint": t0,
        "changepoint_weight": changepoint_weight,
        "count_all_weights": count_all_weights,
        "basis": basis,
        "design": design,
    }
    baseline = heavy_baseline(catalog, restriction, domain, reference, **options)
    baseline = baseline.model_copy(update={"delta_abic": 0.0})
    fit = optimize_hyperparams(catalog, restriction, domain, reference, **options)
    if baseline.abic < fit.abic:
        get_fit_logger(label, "hyper").info("heavy-weight baseline adopted")
        fit = baseline.model_copy(
            update={
                "baseline": False,
                "warnings": baseline.warnings + ("heavy-weight baseline adopted",),
            }
        )
    return fit.model_copy(update={"delta_abic": delta_abic(fit, baseline)}), baseline


def fit_configurations(
    catalog: Catalog,
    labels: Sequence[str],
    reference: EtasParams,
    *,
    changepoint: Optional[float] = None,
    changepoint_weight: Optional[float] = None,
    count_all_weights: bool = False,
    n_jobs: int = 1,
) -> list[tuple[BayesFit, BayesFit]]:
    """Fit several labelled configurations in parallel over a shared design."""
    basis = build_basis(catalog, SmoothingDomain.ORDINARY)
    design = NsDesign(catalog, basis, reference)
    logger.info(f"Fitting {len(labels)} nonstationary configurations")
    return list(
        Parallel(n_jobs=n_jobs)(
            delayed(fit_configuration)(
                catalog,
                label,
                reference,
                changepoint=changepoint,
                changepoint_weight=changepoint_weight,
                count_all_weights=count_all_weights,
                design=design,
            )
            for label in labels
        )
    )


def scoreboard(fits: Sequence[BayesFit]) -> dict[str, Any]:
    """
    Ranking of configurations by ΔABIC.

    Raw ABIC values are listed but only ΔABIC is compared. Relative
    probabilities are exp(-(ΔABIC - ΔABIC_min) / 2).

    Raises:
        ModelSelectionError: If no fit is given or a fit lacks ΔABIC
    """
    if not fits:
        raise ModelSelectionError("no fits to rank")
    missing = [f.label for f in fits if f.delta_abic is None]
    if missing:
        raise ModelSelectionError(
            f"fits without ΔABIC: {', '.join(missing)}", details={"labels": missing}
        )
    best = min(fits, key=lambda f: f.delta_abic)  # type: ignore[arg-type, return-value]
    assert best.delta_abic is not None
    rows = []
    for fit in fits:
        assert fit.delta_abic is not None
        rows.append(
            {
                "label": fit.label,
                "restriction": fit.restriction.value,
                "domain": fit.smoothing_domain.value,
                "changepoint": fit.map.changepoint,
                "w_mu": fit.hyper.w_mu,
                "w_k": fit.hyper.w_k,
                "abic": fit.abic,
                "delta_abic": fit.delta_abic,
                "relative_probability": relative_probability(fit.delta_abic - best.delta_abic),
                "winner": fit is best,
            }
        )
    return {"winner": best.label, "rows": rows}
