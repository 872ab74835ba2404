"""
Residual command for nsetas CLI.

Time-rescaling residuals: event times mapped through the fitted cumulative
intensity, with a KS test of the transformed gaps against Exp(1).
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

import click
import numpy as np

from nsetas.core.exceptions import NsetasError
from nsetas.core.loader import load_anomaly_model, load_params
from nsetas.etas.intensity import ks_exponential, transform_times
from nsetas.etas.nonstationary import build_basis, ns_transform_times
from nsetas.models.etas import ResidualSequence

from .plots import Series, render_chart
from .utils import (
    catalog_options,
    export_to_csv,
    export_to_json,
    handle_error,
    load_catalog_option,
    open_run,
    pick,
    print_header,
    print_success,
    print_summary_tree,
    print_warning,
    run_config,
    run_options,
    write_manifest,
)


def residual_report(residuals: ResidualSequence, model: str) -> dict:
    statistic, pvalue = ks_exponential(residuals)
    n = len(residuals.taus)
    return {
        "model": model,
        "n_events": n,
        "expected_total": residuals.total,
        "count_ratio": n / residuals.total if residuals.total > 0 else None,
        "ks_statistic": statistic,
        "ks_pvalue": pvalue,
    }


def write_transformed(run_dir: Path, residuals: ResidualSequence, title: str) -> list[Path]:
    """Cumulative count against transformed time, with the unit-rate diagonal."""
    taus = np.asarray(residuals.taus, dtype=float)
    counts = np.arange(1, taus.size + 1, dtype=float)
    end = max(residuals.total, float(taus.size))
    csv_path = export_to_csv(residuals.rows(), run_dir / "residual.csv", ["t_i", "tau_i", "i"])
    svg_path = render_chart(
        run_dir / "residual.svg",
        title,
        [
            Series("events", taus, counts, style="step"),
            Series("unit rate", [0.0, end], [0.0, end], dash=True),
        ],
        xlabel="transformed time τ",
        ylabel="cumulative number",
    )
    return [csv_path, svg_path]


@click.command()
@catalog_options
@click.option(
    "--reference",
    type=click.Path(exists=True, dir_okay=False),
    help="Stationary ETAS parameters (params JSON or fit report).",
)
@click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False),
    help="Nonstationary model (model file or per-model nsfit report).",
)
@run_options
@click.pass_context
def residual(
    ctx: click.Context,
    catalog: Optional[str],
    window: Optional[tuple[float, float]],
    mz: Optional[float],
    history_start: Optional[float],
    reference: Optional[str],
    model_path: Optional[str],
    output_dir: Optional[str],
    run_name: Optional[str],
) -> None:
    """
    Transform event times by the fitted model and test them against Exp(1).

    A well-fitted model maps the catalog to a unit-rate Poisson process:
    the cumulative count follows the diagonal and the KS p-value is large.

    \b
    Examples:
        nsetas residual -c demo/catalog.csv --reference runs/fit-x/fit.json
        nsetas residual -c demo/catalog.csv --model runs/nsfit-x/3a-cp.json
    """
    quiet = ctx.obj.get("quiet", False)
    if reference and model_path:
        raise click.UsageError("--reference and --model are mutually exclusive.")
    if not model_path:
        reference = pick(reference, run_config(ctx), "reference")
    if not reference and not model_path:
        raise click.UsageError("Give --reference or --model.")

    try:
        data, catalog_path = load_catalog_option(ctx, catalog, window, mz, history_start)
        if model_path:
            anomaly = load_anomaly_model(model_path)
            basis = build_basis(data, anomaly.smoothing_domain, anomaly.reference)
            residuals = ns_transform_times(anomaly, basis, data)
            name = anomaly.label
        else:
            assert reference is not None
            residuals = transform_times(load_params(reference), data)
            name = "stationary"
        if not quiet:
            print_header("Residual analysis", f"{data.n_events} events, model {name}")

        report = residual_report(residuals, name)
        run_dir = open_run(ctx, "residual", run_name, output_dir)
        outputs = [export_to_json(report, run_dir / "residual.json")]
        outputs += write_transformed(run_dir, residuals, f"Transformed time, model {name}")
        notes = ["fewer than two events: no KS test"] if math.isnan(report["ks_pvalue"]) else []
        write_manifest(
            run_dir,
            "residual",
            {
                "catalog": catalog_path,
                "window": list(data.window),
                "threshold": data.threshold,
                "reference": reference,
                "model": model_path,
            },
            outputs,
            notes,
        )
    except NsetasError as e:
        handle_error(e)

    if not quiet:
        print_summary_tree("Residuals", {k: v for k, v in report.items() if k != "model"})
        for note in notes:
            print_warning(note)
    print_success(f"KS p-value={report['ks_pvalue']:.4g}; results in {run_dir}")
