"""
ETAS computation.

- intensity:     conditional intensity, compensator, log-likelihood, residuals
- mle:           maximum-likelihood fitting and standard errors
- changepoint:   two-stage fits and AIC change-point tests
- nonstationary: piecewise-linear anomaly factors and MAP estimation
- bayes:         Laplace marginal likelihood, ABIC, error bands
- simulation:    thinning simulation and simulate-and-recover runs

Usage:
    from nsetas.etas import fit_mle, two_stage_fit
    fit = fit_mle(catalog, fixed=["p"])
"""

from nsetas.etas.bayes import (
    abic_of,
    delta_abic,
    error_bounds,
    fit_configuration,
    fit_configurations,
    log_marginal,
    optimize_hyperparams,
    prior_penalty_matrix,
    scoreboard,
)
from nsetas.etas.changepoint import (
    combine_aic,
    extrapolate_curve,
    search_changepoint,
    two_stage_fit,
)
from nsetas.etas.intensity import (
    branching_ratio,
    conditional_intensity,
    cumulative_curve,
    cumulative_intensity,
    ks_exponential,
    log_likelihood,
    omori_utsu,
    transform_times,
)
from nsetas.etas.mle import fit_mle, fit_mle_multistart, standard_errors
from nsetas.etas.nonstationary import (
    anomaly_value,
    build_basis,
    intensity_trace,
    map_estimate,
    ns_log_likelihood,
    ns_transform_times,
    penalized_loglik,
    roughness,
)
from nsetas.etas.simulation import gr_magnitudes, roundtrip_recover, simulate_thinning

__all__ = [
    # Stationary
    "omori_utsu",
    "conditional_intensity",
    "cumulative_intensity",
    "cumulative_curve",
    "log_likelihood",
    "transform_times",
    "ks_exponential",
    "branching_ratio",
    "fit_mle",
    "fit_mle_multistart",
    "standard_errors",
    # Change point
    "combine_aic",
    "two_stage_fit",
    "search_changepoint",
    "extrapolate_curve",
    # Nonstationary
    "build_basis",
    "anomaly_value",
    "ns_log_likelihood",
    "roughness",
    "penalized_loglik",
    "map_estimate",
    "intensity_trace",
    "ns_transform_times",
    # Empirical Bayes
    "prior_penalty_matrix",
    "log_marginal",
    "optimize_hyperparams",
    "abic_of",
    "delta_abic",
    "error_bounds",
    "fit_configuration",
    "fit_configurations",
    "scoreboard",
    # Simulation
    "gr_magnitudes",
    "simulate_thinning",
    "roundtrip_recover",
]
