"""
Changepoint command for nsetas CLI.

Two-stage fits around a change point and the AIC comparison with the
whole-window fit.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import click
import numpy as np

from nsetas.core.exceptions import NsetasError
from nsetas.core.loader import load_params
from nsetas.etas.changepoint import (
    extrapolate_curve,
    search_changepoint,
    split_catalog,
    two_stage_fit,
)
from nsetas.etas.intensity import cumulative_curve
from nsetas.models.catalog import Catalog
from nsetas.models.etas import ChangePointResult

from .fit import starting_point
from .plots import Series, render_chart
from .utils import (
    catalog_options,
    export_to_csv,
    export_to_json,
    handle_error,
    load_catalog_option,
    open_run,
    parse_fix,
    pick,
    print_header,
    print_success,
    print_summary_tree,
    run_config,
    run_options,
    write_manifest,
)

CURVE_COLUMNS = ["t", "observed", "whole", "before_extended", "after"]


def write_curves(run_dir: Path, catalog: Catalog, result: ChangePointResult) -> list[Path]:
    """
    Observed N(t) with the whole-window model, the first-period model
    carried across t0, and the second-period model from t0 on.
    """
    times = np.concatenate([catalog.target_times, [catalog.window_end]])
    observed = np.concatenate(
        [np.arange(1, catalog.n_events + 1, dtype=float), [float(catalog.n_events)]]
    )
    whole = cumulative_curve(result.fit_whole.params, catalog, times)
    before = extrapolate_curve(result.fit_before, catalog, times)
    _, after_catalog = split_catalog(catalog, result.t0, reset_history=result.history_reset)
    offset = float(np.sum(catalog.target_times < result.t0))
    later = times >= result.t0
    after = np.full(times.shape, np.nan)
    after[later] = offset + cumulative_curve(result.fit_after.params, after_catalog, times[later])

    rows = [
        {
            "t": float(t),
            "observed": float(n),
            "whole": float(w),
            "before_extended": float(b),
            "after": None if np.isnan(a) else float(a),
        }
        for t, n, w, b, a in zip(times, observed, whole, before, after)
    ]
    csv_path = export_to_csv(rows, run_dir / "curves.csv", CURVE_COLUMNS)
    svg_path = render_chart(
        run_dir / "curves.svg",
        "Cumulative number of events around the change point",
        [
            Series("observed N(t)", times, observed, style="step"),
            Series("whole window", times, whole),
            Series("first period, extended", times, before, dash=True),
            Series("second period", times[later], after[later]),
        ],
        ylabel="events",
        markers=[(result.t0, "t0")],
    )
    return [csv_path, svg_path]


@click.command()
@catalog_options
@click.option("--t0", type=float, help="Predetermined change point (days).")
@click.option("--search", is_flag=True, help="Search event times for the best change point.")
@click.option(
    "--candidates",
    help="Comma-separated candidate times for --search (default: all event times).",
)
@click.option(
    "--q-penalty",
    type=click.FloatRange(min=0),
    help="Degrees of freedom q charged for locating t0 (AIC12 += 2q).",
)
@click.option(
    "--reference",
    type=click.Path(exists=True, dir_okay=False),
    help="Fix c, alpha, p at this model's values and refit only mu, K0.",
)
@click.option("--reset-history", is_flag=True, help="Drop pre-t0 events from period two.")
@click.option("--fix", multiple=True, help="Fix a parameter in all three fits.")
@click.option(
    "--init",
    "init_path",
    type=click.Path(exists=True, dir_okay=False),
    help="Starting parameters.",
)
@click.option("-j", "--n-jobs", type=int, default=1, help="Parallel candidate fits.")
@run_options
@click.pass_context
def changepoint(
    ctx: click.Context,
    catalog: Optional[str],
    window: Optional[tuple[float, float]],
    mz: Optional[float],
    history_start: Optional[float],
    t0: Optional[float],
    search: bool,
    candidates: Optional[str],
    q_penalty: Optional[float],
    reference: Optional[str],
    reset_history: bool,
    fix: tuple[str, ...],
    init_path: Optional[str],
    n_jobs: int,
    output_dir: Optional[str],
    run_name: Optional[str],
) -> None:
    """
    Test for a change point with AIC.

    Fits the whole window and the periods [S, t0) and [t0, T] and reports
    dAIC = AIC1 + AIC2 + 2q - AIC0 (negative favours a change).

    \b
    Examples:
        nsetas changepoint -c demo/catalog.csv --t0 49.8
        nsetas changepoint -c demo/catalog.csv --search --q-penalty 1
        nsetas changepoint -c demo/catalog.csv --t0 49.8 --reference runs/fit-x/fit.json
    """
    quiet = ctx.obj.get("quiet", False)
    config = run_config(ctx)
    t0 = pick(t0, config, "changepoint")
    q = pick(q_penalty, config, "q_penalty", 0.0)
    reference = pick(reference, config, "reference")
    if t0 is None and not search:
        raise click.UsageError("Give --t0 or --search.")
    if t0 is not None and search:
        raise click.UsageError("--t0 and --search are mutually exclusive.")
    grid = None
    if candidates:
        try:
            grid = [float(v) for v in candidates.split(",") if v.strip()]
        except ValueError:
            raise click.BadParameter("expected comma-separated numbers", param_hint="--candidates") from None
    overrides, fixed = parse_fix(fix)

    try:
        data, catalog_path = load_catalog_option(ctx, catalog, window, mz, history_start)
        if not quiet:
            print_header("AIC change-point test", f"{data.n_events} events in {data.window}")
        ref = load_params(reference) if reference else None
        init = None if ref else starting_point(data, init_path, overrides)
        options = {"init": init, "fixed": fixed, "reference": ref, "reset_history": reset_history}
        if search:
            result = search_changepoint(data, grid, q, n_jobs=n_jobs, **options)
        else:
            assert t0 is not None
            result = two_stage_fit(data, t0, q, **options)

        run_dir = open_run(ctx, "changepoint", run_name, output_dir)
        outputs = [export_to_json(result.to_report(), run_dir / "changepoint.json")]
        outputs += write_curves(run_dir, data, result)
        warnings = (
            result.fit_whole.warnings + result.fit_before.warnings + result.fit_after.warnings
        )
        write_manifest(
            run_dir,
            "changepoint",
            {
                "catalog": catalog_path,
                "window": list(data.window),
                "threshold": data.threshold,
                "t0": result.t0,
                "search": search,
                "q_penalty": q,
                "reference": reference,
                "reset_history": reset_history,
            },
            outputs,
            warnings,
        )
    except NsetasError as e:
        handle_error(e)

    if not quiet:
        print_summary_tree(
            "Change point",
            {
                "t0": result.t0,
                "AIC0 (whole)": round(result.fit_whole.aic, 2),
                "AIC1 (before)": round(result.fit_before.aic, 2),
                "AIC2 (after)": round(result.fit_after.aic, 2),
                "AIC12": round(result.aic12, 2),
                "dAIC": round(result.delta_aic, 2),
            },
        )
    verdict = "change favoured" if result.significant else "no change favoured"
    print_success(f"dAIC={result.delta_aic:.2f} ({verdict}); results in {run_dir}")
