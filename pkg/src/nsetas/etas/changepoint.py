"""
Two-stage ETAS fitting and AIC change-point tests.

A change point t0 splits the window into [S, t0) and [t0, T]. Each period
is fitted separately and the sum of the period AICs, plus 2q for the
degrees of freedom spent locating t0, is compared with the whole-window
AIC. Events before t0 stay in the second period's triggering history
unless ``reset_history`` is set.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from nsetas.core.exceptions import (
    EmptyPeriodError,
    FitError,
    ModelSelectionError,
    ValidationError,
)
from nsetas.core.logging import get_logger
from nsetas.etas.intensity import cumulative_curve
from nsetas.etas.mle import FixMask, fit_mle
from nsetas.models.catalog import Catalog
from nsetas.models.etas import ChangePointResult, EtasParams, FitResult, parse_fixed

logger = get_logger(__name__)

REFERENCE_FIXED = ("c", "alpha", "p")


def combine_aic(
    aic0: float, aic1: float, aic2: float, q_penalty: float = 0.0
) -> tuple[float, float]:
    """
    Combine period AICs.

    Returns:
        (aic12, delta_aic) with aic12 = aic1 + aic2 + 2q and delta = aic12 - aic0
    """
    if q_penalty < 0:
        raise ValidationError("must be non-negative", field="q_penalty", value=q_penalty)
    aic12 = aic1 + aic2 + 2.0 * q_penalty
    return aic12, aic12 - aic0


def split_catalog(
    catalog: Catalog, t0: float, *, reset_history: bool = False
) -> tuple[Catalog, Catalog]:
    """
    Catalogs of the two periods.

    The first period keeps events strictly before t0; the second starts at
    t0 and, unless ``reset_history``, keeps every earlier event as history.
    """
    if not catalog.window_start < t0 < catalog.window_end:
        raise ValidationError(
            f"change point must lie strictly inside ({catalog.window_start}, {catalog.window_end})",
            field="t0",
            value=t0,
        )
    before = catalog.sub_window(catalog.window_start, t0, right_open=True)
    after = catalog.sub_window(t0, catalog.window_end, keep_history=not reset_history)
    return before, after


def _options(
    init: Optional[EtasParams], fixed: FixMask, reference: Optional[EtasParams]
) -> tuple[Optional[EtasParams], tuple[str, ...]]:
    if reference is None:
        return init, parse_fixed(fixed)
    names = set(parse_fixed(fixed)) | set(REFERENCE_FIXED)
    return reference, parse_fixed(names)


def _fit_period(
    catalog: Catalog, init: Optional[EtasParams], fixed: tuple[str, ...], label: str
) -> FitResult:
    try:
        return fit_mle(catalog, init, fixed, label=label)
    except EmptyPeriodError as e:
        raise EmptyPeriodError(
            f"the {label} period [{catalog.window_start}, {catalog.window_end}] has no events",
            model=label,
            operation="two_stage_fit",
            period=catalog.window,
        ) from e


def _split_fits(
    catalog: Catalog,
    t0: float,
    init: Optional[EtasParams],
    fixed: tuple[str, ...],
    reset_history: bool,
) -> tuple[FitResult, FitResult]:
    before, after = split_catalog(catalog, t0, reset_history=reset_history)
    return (
        _fit_period(before, init, fixed, "before"),
        _fit_period(after, init, fixed, "after"),
    )


def _assemble(
    t0: float,
    whole: FitResult,
    before: FitResult,
    after: FitResult,
    q_penalty: float,
    reset_history: bool,
    evaluated: int = 1,
) -> ChangePointResult:
    aic12, delta = combine_aic(whole.aic, before.aic, after.aic, q_penalty)
    return ChangePointResult(
        t0=t0,
        fit_whole=whole,
        fit_before=before,
        fit_after=after,
        q_penalty=q_penalty,
        aic12=aic12,
        delta_aic=delta,
        significant=delta < 0,
        history_reset=reset_history,
        candidates_evaluated=evaluated,
    )


def two_stage_fit(
    catalog: Catalog,
    t0: float,
    q_penalty: float = 0.0,
    *,
    init: Optional[EtasParams] = None,
    fixed: FixMask = None,
    reference: Optional[EtasParams] = None,
    reset_history: bool = False,
) -> ChangePointResult:
    """
    Fit the whole window and both periods around a predetermined t0.

    Args:
        catalog: Filtered catalog
        t0: Change point, strictly inside (S, T)
        q_penalty: Degrees-of-freedom penalty q (0 for a predetermined t0)
        init: Starting point for all three fits
        fixed: Fix mask shared by all three fits
        reference: Fix (c, alpha, p) at these values and refit only mu, K0
        reset_history: Drop pre-t0 events from the second period's history

    Raises:
        ValidationError: If t0 is outside (S, T) or q_penalty < 0
        EmptyPeriodError: If either period has no events
    """
    if q_penalty < 0:
        raise ValidationError("must be non-negative", field="q_penalty", value=q_penalty)
    init, fixed_names = _options(init, fixed, reference)
    before, after = _split_fits(catalog, t0, init, fixed_names, reset_history)
    whole = fit_mle(catalog, init, fixed_names, label="whole")
    result = _assemble(t0, whole, before, after, q_penalty, reset_history)
    logger.info(
        f"t0={t0}: AIC0={whole.aic:.2f} AIC1={before.aic:.2f} AIC2={after.aic:.2f} "
        f"dAIC={result.delta_aic:.2f}"
    )
    return result


def default_candidates(catalog: Catalog) -> list[float]:
    """Distinct in-window event times strictly inside (S, T)."""
    times = np.unique(catalog.target_times)
    inside = times[(times > catalog.window_start) & (times < catalog.window_end)]
    return [float(t) for t in inside]


def _try_split(
    catalog: Catalog,
    t0: float,
    init: Optional[EtasParams],
    fixed: tuple[str, ...],
    reset_history: bool,
) -> Optional[tuple[FitResult, FitResult]]:
    try:
        return _split_fits(catalog, t0, init, fixed, reset_history)
    except FitError as e:
        logger.warning(f"candidate t0={t0} skipped: {e}")
        return None


def search_changepoint(
    catalog: Catalog,
    candidates: Optional[Sequence[float]] = None,
    q_penalty: float = 0.0,
    *,
    init: Optional[EtasParams] = None,
    fixed: FixMask = None,
    reference: Optional[EtasParams] = None,
    reset_history: bool = False,
    n_jobs: int = 1,
) -> ChangePointResult:
    """
    Select the candidate minimizing AIC1 + AIC2.

    Candidates whose periods cannot be fitted are skipped with a warning.
    Ties go to the earliest candidate. The penalty 2q enters AIC12 once.

    Args:
        candidates: Change-point times (default: ``default_candidates``)
        n_jobs: joblib worker count for candidate fits

    Raises:
        ValidationError: If a candidate is outside (S, T)
        ModelSelectionError: If the candidate list is empty or no candidate
            could be fitted
    """
    if q_penalty < 0:
        raise ValidationError("must be non-negative", field="q_penalty", value=q_penalty)
    grid = sorted(set(default_candidates(catalog) if candidates is None else map(float, candidates)))
    if not grid:
        raise ModelSelectionError("empty change-point candidate list")
    outside = [t for t in grid if not catalog.window_start < t < catalog.window_end]
    if outside:
        raise ValidationError(
            f"candidates must lie strictly inside ({catalog.window_start}, {catalog.window_end})",
            field="candidates",
            value=outside[:5],
        )

    init, fixed_names = _options(init, fixed, reference)
    logger.info(f"Evaluating {len(grid)} change-point candidates")
    fits = Parallel(n_jobs=n_jobs)(
        delayed(_try_split)(catalog, t0, init, fixed_names, reset_history) for t0 in grid
    )

    best_t0: Optional[float] = None
    best_pair: Optional[tuple[FitResult, FitResult]] = None
    best_sum = math.inf
    for t0, pair in zip(grid, fits):
        if pair is None:
            continue
        total = pair[0].aic + pair[1].aic
        if total < best_sum:
            best_t0, best_pair, best_sum = t0, pair, total
    if best_pair is None or best_t0 is None:
        raise ModelSelectionError(
            "no change-point candidate could be fitted",
            details={"candidates": len(grid)},
        )

    whole = fit_mle(catalog, init, fixed_names, label="whole")
    result = _assemble(
        best_t0, whole, best_pair[0], best_pair[1], q_penalty, reset_history, len(grid)
    )
    logger.info(
        f"Selected t0={best_t0} of {len(grid)}: AIC12={result.aic12:.2f} dAIC={result.delta_aic:.2f}"
    )
    return result


def extrapolate_curve(
    fit_before: FitResult, catalog: Catalog, times: Sequence[float]
) -> np.ndarray:
    """
    Lambda(t) of the first-period model carried across the change point.

    The curve uses the full occurrence history of ``catalog``, so past t0
    it shows how many events the pre-change model would have expected.
    """
    return cumulative_curve(fit_before.params, catalog, np.asarray(times, dtype=float))
