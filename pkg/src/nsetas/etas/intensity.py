"""
Evaluation kernels for the temporal ETAS model.

    lambda(t) = mu + sum_{t_j < t} K0 exp(alpha (M_j - Mz)) / (t - t_j + c)^p
    Lambda(t) = mu (t - S) + sum_j K0 exp(alpha (M_j - Mz)) G_j(t)

where G_j(t) integrates the Omori kernel from max(t_j, S) to t. History
events (t_j < S) are parents but never targets. Every function here is a
pure function of immutable inputs.

Event integrals use the substitution y = log(u + c):

    int_lo^hi (u + c)^-p du = (lo + c)^q d phi1(q d),   q = 1 - p,
    d = log((hi + c) / (lo + c)),   phi1(x) = (e^x - 1) / x

which is exact at p = 1 (phi1(0) = 1) and free of cancellation near it.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from typing import Optional

import numpy as np
from scipy import stats

from nsetas.config.settings import get_settings
from nsetas.core.exceptions import DegenerateLikelihoodError, ValidationError
from nsetas.core.logging import get_logger
from nsetas.models.catalog import Catalog
from nsetas.models.etas import EtasParams, ResidualSequence

logger = get_logger(__name__)

# Cells per (targets x parents) block of the pairwise lag matrix
_BLOCK_CELLS = 2_000_000

# |q d| below which the series forms of phi1 / phi2 are used
_PHI1_SERIES = 1e-8
_PHI2_SERIES = 1e-3


# ==================== Omori-Utsu kernel ====================


def omori_utsu(k: float, c: float, p: float, t: float) -> float:
    """
    Omori-Utsu aftershock rate K / (t + c)^p.

    Raises:
        ValidationError: If c <= 0, p <= 0, t < 0, or any value is not finite
    """
    for name, value in (("k", k), ("c", c), ("p", p), ("t", t)):
        if not math.isfinite(value):
            raise ValidationError("must be finite", field=name, value=value)
    if c <= 0:
        raise ValidationError("must be positive", field="c", value=c)
    if p <= 0:
        raise ValidationError("must be positive", field="p", value=p)
    if t < 0:
        raise ValidationError("must be non-negative", field="t", value=t)
    return float(k / (t + c) ** p)


def _phi1(x: np.ndarray) -> np.ndarray:
    """(e^x - 1) / x with phi1(0) = 1."""
    small = np.abs(x) < _PHI1_SERIES
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5 * x, np.expm1(safe) / safe)


def _phi2(x: np.ndarray) -> np.ndarray:
    """int_0^1 s e^{x s} ds with phi2(0) = 1/2."""
    small = np.abs(x) < _PHI2_SERIES
    safe = np.where(small, 1.0, x)
    series = 0.5 + x / 3.0 + x**2 / 8.0 + x**3 / 30.0 + x**4 / 144.0
    exact = (safe * np.exp(safe) - np.expm1(safe)) / safe**2
    return np.where(small, series, exact)


def omori_integral(
    lo: np.ndarray | float, hi: np.ndarray | float, c: float, p: float
) -> np.ndarray:
    """
    int_lo^hi (u + c)^-p du for 0 <= lo <= hi, elementwise.

    Closed form for every p > 0, continuous through p = 1.
    """
    integral, _, _ = _omori_integral_parts(
        np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), c, p, grad=False
    )
    return integral


def _omori_integral_parts(
    lo: np.ndarray, hi: np.ndarray, c: float, p: float, *, grad: bool
) -> tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    """Integral and, optionally, its derivatives with respect to c and p."""
    q = 1.0 - p
    base = lo + c
    a = np.log(base)
    d = np.log1p((hi - lo) / base)
    x = q * d
    phi1 = _phi1(x)
    scale = np.exp(q * a)
    integral = scale * d * phi1
    if not grad:
        return integral, None, None
    d_c = (hi + c) ** (-p) - base ** (-p)
    d_p = -scale * (a * d * phi1 + d * d * _phi2(x))
    return integral, d_c, d_p


# ==================== Pairwise parent blocks ====================


def _lag_blocks(
    times: np.ndarray, targets: np.ndarray
) -> Iterator[tuple[int, int, np.ndarray]]:
    """
    Yield (start, stop, lag) with lag[r, j] = targets[start + r] - times[j].

    Only the parent prefix that can precede the block is materialized;
    parents of a target are the entries with lag > 0.
    """
    n_all = times.size
    rows = max(1, _BLOCK_CELLS // max(n_all, 1))
    prefix = np.searchsorted(times, targets, side="left")
    for start in range(0, targets.size, rows):
        stop = min(start + rows, targets.size)
        ncols = int(prefix[start:stop].max()) if stop > start else 0
        yield start, stop, targets[start:stop, None] - times[None, :ncols]


def _row_sums(values: np.ndarray, compensated: bool) -> np.ndarray:
    if not compensated:
        return values.sum(axis=1)
    # largest contributions first, exactly rounded
    return np.array([math.fsum(np.sort(row)[::-1]) for row in values])


class TriggerSums:
    """
    Per-target sums over strict parents of w_ij = a_j (t_i - t_j + c)^-p.

    ``a_j = weight_j exp(alpha m_j)``; the optional sums are the pieces of
    the analytic gradient: sum w/(lag + c), sum w m, sum w log(lag + c).
    """

    __slots__ = ("total", "over_lag", "magnitude", "log_lag")

    def __init__(self, n: int, grad: bool) -> None:
        self.total = np.zeros(n)
        self.over_lag = np.zeros(n) if grad else None
        self.magnitude = np.zeros(n) if grad else None
        self.log_lag = np.zeros(n) if grad else None


def trigger_sums(
    times: np.ndarray,
    excess: np.ndarray,
    targets: np.ndarray,
    c: float,
    alpha: float,
    p: float,
    *,
    weights: Optional[np.ndarray] = None,
    grad: bool = False,
    compensated: bool = False,
) -> TriggerSums:
    """
    Triggering sums at the target times (without the K0 factor).

    Args:
        times: Sorted occurrence times of all potential parents
        excess: M_j - Mz for each parent
        targets: Evaluation times
        c, alpha, p: Kernel parameters
        weights: Optional per-parent factors (q_K(t_j) for anomaly models)
        grad: Also accumulate the gradient pieces
        compensated: Use exactly rounded sums in descending order
    """
    sums = TriggerSums(targets.size, grad)
    amplitude = np.exp(alpha * excess)
    if weights is not None:
        amplitude = amplitude * weights
    for start, stop, lag in _lag_blocks(times, targets):
        if lag.shape[1] == 0:
            continue
        mask = lag > 0
        shifted = np.where(mask, lag + c, 1.0)
        log_shifted = np.log(shifted)
        ncols = lag.shape[1]
        w = np.where(mask, amplitude[None, :ncols] * np.exp(-p * log_shifted), 0.0)
        sums.total[start:stop] = _row_sums(w, compensated)
        if grad:
            assert sums.over_lag is not None
            assert sums.magnitude is not None and sums.log_lag is not None
            sums.over_lag[start:stop] = (w / shifted).sum(axis=1)
            sums.magnitude[start:stop] = (w * excess[None, :ncols]).sum(axis=1)
            sums.log_lag[start:stop] = (w * log_shifted).sum(axis=1)
    return sums


def trigger_matrix(
    catalog: Catalog, params: EtasParams, targets: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Dense matrix g[i, j] = K0 exp(alpha m_j) (t_i - t_j + c)^-p over strict parents.

    Rows follow ``targets`` (default: in-window event times); columns follow
    ``catalog.events``. Intended for the penalized-likelihood design matrices.
    """
    times = catalog.times
    targets = catalog.target_times if targets is None else np.asarray(targets, dtype=float)
    matrix = np.zeros((targets.size, times.size))
    amplitude = params.k0 * np.exp(params.alpha * catalog.excess_magnitudes)
    for start, stop, lag in _lag_blocks(times, targets):
        ncols = lag.shape[1]
        if ncols == 0:
            continue
        mask = lag > 0
        shifted = np.where(mask, lag + params.c, 1.0)
        matrix[start:stop, :ncols] = np.where(
            mask, amplitude[None, :ncols] * shifted ** (-params.p), 0.0
        )
    return matrix


def event_integrals(catalog: Catalog, params: EtasParams, t: float) -> np.ndarray:
    """
    Per-event triggered count K0 exp(alpha m_j) G_j(t), zero for t_j >= t.

    G_j integrates from max(t_j, S) to t.
    """
    times = catalog.times
    parents = times < t
    lo = np.maximum(catalog.window_start - times, 0.0)
    hi = np.maximum(t - times, lo)
    integral = omori_integral(lo, hi, params.c, params.p)
    amplitude = params.k0 * np.exp(params.alpha * catalog.excess_magnitudes)
    return np.where(parents, amplitude * integral, 0.0)


# ==================== Prepared likelihood ====================


class EtasLikelihood:
    """
    Log-likelihood of a fixed catalog as a function of the parameter vector.

    The vector is (mu, K0, c, alpha, p). Used by the maximum-likelihood
    fitter, which evaluates it many times on the same catalog.
    """

    def __init__(self, catalog: Catalog) -> None:
        self.catalog = catalog
        self.times = catalog.times
        self.excess = catalog.excess_magnitudes
        self.targets = catalog.target_times
        self.start, self.end = catalog.window
        self.compensated = len(catalog.events) > get_settings().kahan_threshold

    def intensities(self, theta: np.ndarray) -> np.ndarray:
        """lambda at each in-window event."""
        mu, k0, c, alpha, p = (float(v) for v in theta)
        sums = trigger_sums(
            self.times, self.excess, self.targets, c, alpha, p,
            compensated=self.compensated,
        )
        return mu + k0 * sums.total

    def value(self, theta: np.ndarray) -> float:
        """Sum of log lambda(t_i) minus Lambda(T)."""
        value, _ = self._evaluate(theta, grad=False)
        return value

    def value_and_gradient(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        value, gradient = self._evaluate(theta, grad=True)
        assert gradient is not None
        return value, gradient

    def _evaluate(
        self, theta: np.ndarray, *, grad: bool
    ) -> tuple[float, Optional[np.ndarray]]:
        mu, k0, c, alpha, p = (float(v) for v in theta)
        sums = trigger_sums(
            self.times, self.excess, self.targets, c, alpha, p,
            grad=grad, compensated=self.compensated,
        )
        lam = mu + k0 * sums.total
        if lam.size and not np.all(lam > 0):
            first = int(np.argmax(~(lam > 0)))
            raise DegenerateLikelihoodError(
                f"conditional intensity vanishes at event t={self.targets[first]}",
                operation="log_likelihood",
                details={"event_index": first},
            )
        log_lam = np.log(lam)
        event_term = math.fsum(log_lam) if self.compensated else float(log_lam.sum())

        lo = np.maximum(self.start - self.times, 0.0)
        hi = np.maximum(self.end - self.times, lo)
        integral, d_c, d_p = _omori_integral_parts(lo, hi, c, p, grad=grad)
        amplitude = np.exp(alpha * self.excess)
        weighted = amplitude * integral
        compensator = mu * (self.end - self.start) + k0 * (
            math.fsum(weighted) if self.compensated else float(weighted.sum())
        )
        value = event_term - compensator
        if not grad:
            return value, None

        assert sums.over_lag is not None and d_c is not None and d_p is not None
        inv = 1.0 / lam
        gradient = np.array([
            inv.sum() - (self.end - self.start),
            (sums.total * inv).sum() - weighted.sum(),
            (-p * k0 * sums.over_lag * inv).sum() - k0 * (amplitude * d_c).sum(),
            (k0 * sums.magnitude * inv).sum() - k0 * (weighted * self.excess).sum(),
            (-k0 * sums.log_lag * inv).sum() - k0 * (amplitude * d_p).sum(),
        ])
        return value, gradient


# ==================== Public kernels ====================


def _check_time(catalog: Catalog, t: float) -> None:
    if not math.isfinite(t) or not catalog.window_start <= t <= catalog.window_end:
        raise ValidationError(
            f"t must lie within [{catalog.window_start}, {catalog.window_end}]",
            field="t",
            value=t,
        )


def intensity_at(params: EtasParams, catalog: Catalog, times: np.ndarray) -> np.ndarray:
    """lambda(t) at many times (strict parents, history included)."""
    times = np.asarray(times, dtype=float)
    sums = trigger_sums(
        catalog.times, catalog.excess_magnitudes, times,
        params.c, params.alpha, params.p,
    )
    return params.mu + params.k0 * sums.total


def conditional_intensity(params: EtasParams, catalog: Catalog, t: float) -> float:
    """
    lambda(t | H_t); an event exactly at t is not its own parent.

    Raises:
        ValidationError: If t is outside [S, T]
    """
    _check_time(catalog, t)
    return float(intensity_at(params, catalog, np.array([t]))[0])


def triggered_curve(
    params: EtasParams,
    catalog: Catalog,
    times: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Expected number of triggered events in [S, t], optionally with per-parent factors."""
    times = np.asarray(times, dtype=float)
    out = np.zeros(times.shape)
    if not len(catalog.events):
        return out
    lo = np.maximum(catalog.window_start - catalog.times, 0.0)
    amplitude = params.k0 * np.exp(params.alpha * catalog.excess_magnitudes)
    if weights is not None:
        amplitude = amplitude * np.asarray(weights, dtype=float)
    for start, stop, lag in _lag_blocks(catalog.times, times):
        ncols = lag.shape[1]
        if ncols == 0:
            continue
        mask = lag > 0
        lo_block = np.broadcast_to(lo[None, :ncols], lag.shape)
        hi_block = np.where(mask, np.maximum(lag, lo_block), lo_block)
        integral = omori_integral(lo_block, hi_block, params.c, params.p)
        out[start:stop] += np.where(mask, amplitude[None, :ncols] * integral, 0.0).sum(axis=1)
    return out


def cumulative_curve(
    params: EtasParams, catalog: Catalog, times: np.ndarray
) -> np.ndarray:
    """
    Lambda(t) at many times in [S, T] (no range check).

    Each value is computed directly from the closed forms, so the curve is
    exact at every point rather than accumulated.
    """
    times = np.asarray(times, dtype=float)
    return params.mu * (times - catalog.window_start) + triggered_curve(params, catalog, times)


def cumulative_intensity(params: EtasParams, catalog: Catalog, t: float) -> float:
    """
    Expected number of events in [S, t].

    Raises:
        ValidationError: If t is outside [S, T]
    """
    _check_time(catalog, t)
    return float(cumulative_curve(params, catalog, np.array([t]))[0])


def log_likelihood(params: EtasParams, catalog: Catalog) -> float:
    """
    Point-process log-likelihood sum_i log lambda(t_i) - Lambda(T).

    Raises:
        DegenerateLikelihoodError: If lambda vanishes at an in-window event
    """
    return EtasLikelihood(catalog).value(params.as_array())


def log_likelihood_gradient(params: EtasParams, catalog: Catalog) -> np.ndarray:
    """Analytic gradient of the log-likelihood in (mu, K0, c, alpha, p)."""
    _, gradient = EtasLikelihood(catalog).value_and_gradient(params.as_array())
    return gradient


def transform_times(params: EtasParams, catalog: Catalog) -> ResidualSequence:
    """Map each in-window event time through Lambda; total is Lambda(T)."""
    targets = catalog.target_times
    values = cumulative_curve(
        params, catalog, np.concatenate([targets, [catalog.window_end]])
    )
    return residuals_from_curve(targets, values)


def residuals_from_curve(targets: np.ndarray, values: np.ndarray) -> ResidualSequence:
    """
    Build a ResidualSequence from Lambda at the targets followed by Lambda(T).

    Lambda is nondecreasing, so any decrease between consecutive targets is
    rounding noise and is clipped. A clip that moves a value is logged at
    debug level, as a large one points at a nonpositive intensity.
    """
    raw = np.asarray(values[:-1], dtype=float)
    taus = np.maximum.accumulate(np.maximum(raw, 0.0)) if raw.size else raw
    if raw.size and np.any(taus != raw):
        shift = float(np.max(taus - raw))
        logger.debug(
            f"clipped {int(np.count_nonzero(taus != raw))} transformed time(s) "
            f"to keep them nondecreasing (largest shift {shift:.3g})"
        )
    total = max(float(values[-1]), float(taus[-1]) if taus.size else 0.0)
    return ResidualSequence(
        times=tuple(float(t) for t in targets),
        taus=tuple(float(v) for v in taus),
        total=total,
    )


def ks_exponential(residuals: ResidualSequence) -> tuple[float, float]:
    """
    Kolmogorov-Smirnov test of the transformed inter-event gaps against Exp(1).

    The first gap is measured from Lambda(S) = 0.

    Returns:
        (statistic, p-value); (nan, nan) with fewer than two events
    """
    if len(residuals.taus) < 2:
        return float("nan"), float("nan")
    result = stats.kstest(residuals.gaps, "expon")
    return float(result.statistic), float(result.pvalue)


def branching_ratio(
    params: EtasParams,
    b_value: float,
    duration: Optional[float] = None,
    productivity_scale: float = 1.0,
) -> float:
    """
    Expected number of direct offspring per event.

    K0 beta / (beta - alpha) int_0^D (u + c)^-p du with beta = b ln 10,
    for Gutenberg-Richter magnitudes above Mz. ``duration=None`` takes the
    infinite-time integral, which is finite only for p > 1.

    Returns:
        The ratio, ``inf`` when alpha >= beta or the integral diverges
    """
    if b_value <= 0:
        raise ValidationError("must be positive", field="b_value", value=b_value)
    beta = b_value * math.log(10.0)
    if params.alpha >= beta:
        return math.inf
    if duration is None:
        if params.p <= 1.0:
            return math.inf
        integral = params.c ** (1.0 - params.p) / (params.p - 1.0)
    else:
        integral = float(omori_integral(0.0, max(duration, 0.0), params.c, params.p))
    return productivity_scale * params.k0 * beta / (beta - params.alpha) * integral
