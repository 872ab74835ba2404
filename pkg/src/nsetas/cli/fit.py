"""
Fit command for nsetas CLI.

Maximum-likelihood fit of a stationary ETAS model.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import click
import numpy as np
from pydantic import ValidationError as PydanticValidationError

from nsetas.core.exceptions import NsetasError
from nsetas.core.loader import load_params
from nsetas.etas.intensity import branching_ratio, cumulative_curve
from nsetas.etas.mle import default_init, fit_mle_multistart, fit_summary
from nsetas.models.catalog import Catalog
from nsetas.models.etas import EtasParams, FitResult

from .plots import Series, render_chart
from .utils import (
    catalog_options,
    export_to_csv,
    export_to_json,
    handle_error,
    load_catalog_option,
    open_run,
    parse_fix,
    print_header,
    print_success,
    print_table,
    print_warning,
    run_options,
    write_manifest,
)


def starting_point(
    catalog: Catalog, init_path: Optional[str], overrides: dict[str, float]
) -> EtasParams:
    """--init file (or the default start) with --fix values applied."""
    init = load_params(init_path) if init_path else default_init(catalog)
    try:
        return init.replace(**overrides) if overrides else init
    except PydanticValidationError as e:
        raise click.BadParameter(e.errors()[0]["msg"], param_hint="--fix") from None


def write_cumulative(
    run_dir: Path,
    catalog: Catalog,
    params: EtasParams,
    name: str = "cumulative",
    title: str = "Cumulative number of events",
    markers: tuple[tuple[float, str], ...] = (),
) -> list[Path]:
    """Observed N(t) against the model's Lambda(t) at every event and at T."""
    times = np.concatenate([catalog.target_times, [catalog.window_end]])
    observed = np.concatenate(
        [np.arange(1, catalog.n_events + 1, dtype=float), [float(catalog.n_events)]]
    )
    expected = cumulative_curve(params, catalog, times)
    rows = [
        {"t": float(t), "observed": float(n), "expected": float(e)}
        for t, n, e in zip(times, observed, expected)
    ]
    csv_path = export_to_csv(rows, run_dir / f"{name}.csv", ["t", "observed", "expected"])
    svg_path = render_chart(
        run_dir / f"{name}.svg",
        title,
        [
            Series("observed N(t)", times, observed, style="step"),
            Series("model Λ(t)", times, expected),
        ],
        ylabel="events",
        markers=markers,
    )
    return [csv_path, svg_path]


def fit_report(fit: FitResult, catalog: Catalog, b_value: Optional[float]) -> dict:
    report = fit.to_report()
    report["catalog"] = catalog.summary()
    report["branching_ratio"] = (
        branching_ratio(fit.params, b_value, catalog.duration) if b_value else None
    )
    return report


@click.command()
@catalog_options
@click.option(
    "--fix",
    multiple=True,
    help="Fix a parameter, e.g. --fix p=1.0 or --fix alpha (repeatable).",
)
@click.option(
    "--init",
    "init_path",
    type=click.Path(exists=True, dir_okay=False),
    help="Starting parameters (bare params JSON or a fit report).",
)
@click.option("--restarts", type=click.IntRange(min=0), default=0, help="Perturbed restarts.")
@click.option("--seed", type=int, default=0, help="Seed for restart perturbations.")
@click.option("--b-value", type=float, help="Gutenberg-Richter b for the branching ratio.")
@run_options
@click.pass_context
def fit(
    ctx: click.Context,
    catalog: Optional[str],
    window: Optional[tuple[float, float]],
    mz: Optional[float],
    history_start: Optional[float],
    fix: tuple[str, ...],
    init_path: Optional[str],
    restarts: int,
    seed: int,
    b_value: Optional[float],
    output_dir: Optional[str],
    run_name: Optional[str],
) -> None:
    """
    Fit a stationary ETAS model by maximum likelihood.

    Writes fit.json, cumulative.csv / cumulative.svg (observed N(t) against
    the fitted Lambda(t)) and manifest.json to a new run directory.

    \b
    Examples:
        nsetas fit --catalog demo/catalog.csv
        nsetas fit -c demo/catalog.csv --fix p=1.0 --window 0,200
    """
    quiet = ctx.obj.get("quiet", False)
    overrides, fixed = parse_fix(fix)
    try:
        data, catalog_path = load_catalog_option(ctx, catalog, window, mz, history_start)
        if not quiet:
            print_header("ETAS maximum-likelihood fit", f"{data.n_events} events in {data.window}")
        init = starting_point(data, init_path, overrides)
        result = fit_mle_multistart(data, init, fixed, restarts=restarts, seed=seed)

        run_dir = open_run(ctx, "fit", run_name, output_dir)
        outputs = [export_to_json(fit_report(result, data, b_value), run_dir / "fit.json")]
        outputs += write_cumulative(run_dir, data, result.params)
        write_manifest(
            run_dir,
            "fit",
            {
                "catalog": catalog_path,
                "window": list(data.window),
                "threshold": data.threshold,
                "fixed": list(result.fixed),
                "restarts": restarts,
                "seed": seed,
            },
            outputs,
            result.warnings,
        )
    except NsetasError as e:
        handle_error(e)

    if not quiet:
        print_table("Fitted parameters", [fit_summary(result)], list(fit_summary(result)))
        for message in result.warnings:
            print_warning(message)
    print_success(f"AIC={result.aic:.2f}; results in {run_dir}")
