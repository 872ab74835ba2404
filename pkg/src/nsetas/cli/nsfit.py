"""
Nsfit command for nsetas CLI.

Nonstationary ETAS inversion over the labelled model configurations and
the ΔABIC scoreboard.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import click

from nsetas.core.exceptions import NsetasError
from nsetas.core.loader import load_params
from nsetas.etas.bayes import fit_configurations, scoreboard
from nsetas.etas.mle import fit_mle
from nsetas.etas.nonstationary import build_basis, intensity_trace
from nsetas.models.anomaly import ALL_LABELS, PRIME, BayesFit, model_label, parse_label
from nsetas.models.catalog import Catalog

from .plots import Series, render_chart
from .utils import (
    catalog_options,
    export_to_csv,
    export_to_json,
    export_to_markdown,
    handle_error,
    load_catalog_option,
    open_run,
    pick,
    print_header,
    print_info,
    print_success,
    print_table,
    print_warning,
    run_config,
    run_options,
    write_manifest,
)

TRACE_COLUMNS = ["t", "q_mu", "q_k", "mu", "k0", "lambda", "error_mu", "error_k"]
SCORE_COLUMNS = ["label", "delta_abic", "relative_probability", "abic", "w_mu", "w_k", "winner"]


def file_stem(label: str) -> str:
    """File-name form of a label: 3a′ -> 3a-cp."""
    return label.replace(PRIME, "-cp")


def select_labels(spec: str, has_changepoint: bool) -> tuple[list[str], list[str]]:
    """
    Parse the --models selection.

    "all" expands to the twelve configurations, or to the six without a
    change point when none is configured.

    Returns:
        (labels to fit, warnings)

    Raises:
        click.BadParameter: On unknown labels or primed labels without a change point
    """
    if spec.strip().lower() == "all":
        if has_changepoint:
            return list(ALL_LABELS), []
        return (
            [label for label in ALL_LABELS if PRIME not in label],
            ["no --changepoint given: fitting the six configurations without one"],
        )
    labels = []
    for part in spec.split(","):
        if not part.strip():
            continue
        try:
            restriction, domain, with_cp = parse_label(part)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint="--models") from None
        if with_cp and not has_changepoint:
            raise click.BadParameter(
                f"model {part.strip()} needs --changepoint", param_hint="--models"
            )
        label = model_label(restriction, domain, with_cp)
        if label not in labels:
            labels.append(label)
    if not labels:
        raise click.BadParameter("no models selected", param_hint="--models")
    return labels, []


def write_fit(run_dir: Path, catalog: Catalog, fit: BayesFit) -> list[Path]:
    """Model file, report, trace CSV and factor chart of one configuration."""
    stem = file_stem(fit.label)
    model_path = export_to_json(fit.map.to_report(), run_dir / f"{stem}.model.json")

    basis = build_basis(catalog, fit.smoothing_domain, fit.map.reference)
    trace = intensity_trace(fit.map, basis, catalog, basis.knot_array)
    rows = [
        {
            "t": float(trace["t"][i]),
            "q_mu": fit.map.q_mu[i],
            "q_k": fit.map.q_k[i],
            "mu": float(trace["mu"][i]),
            "k0": float(trace["k0"][i]),
            "lambda": float(trace["lambda"][i]),
            "error_mu": fit.error_mu[i],
            "error_k": fit.error_k[i],
        }
        for i in range(basis.size)
    ]
    trace_path = export_to_csv(rows, run_dir / f"{stem}.trace.csv", TRACE_COLUMNS)

    report = fit.to_report()
    report["map_ref"] = model_path.name
    report["error_trace"] = trace_path.name
    report_path = export_to_json(report, run_dir / f"{stem}.json")

    markers = [(fit.map.changepoint, "t0")] if fit.map.changepoint is not None else []
    svg_path = render_chart(
        run_dir / f"{stem}.svg",
        f"Model {fit.label}: background and productivity",
        [
            Series("μ(t)", trace["t"], trace["mu"]),
            Series("K0(t)", trace["t"], trace["k0"]),
            Series("λ(t)", trace["t"], trace["lambda"], style="dots"),
        ],
        ylabel="rate",
        log_y=True,
        markers=markers,
    )
    return [model_path, trace_path, report_path, svg_path]


@click.command()
@catalog_options
@click.option(
    "--reference",
    type=click.Path(exists=True, dir_okay=False),
    help="Reference ETAS parameters (default: MLE on the catalog).",
)
@click.option(
    "-m",
    "--models",
    help="'all' or comma-separated labels such as 1a,2b,3a′ (3a' also accepted).",
)
@click.option("--changepoint", type=float, help="Change point t0 for primed models (days).")
@click.option(
    "--changepoint-weight",
    type=click.FloatRange(min=0, min_open=True),
    help="Penalty weight of the interval containing t0 (default 1e-5).",
)
@click.option(
    "--count-all-weights",
    is_flag=True,
    help="Count 4 / 8 hyperparameters in ABIC instead of the active 2 / 4.",
)
@click.option("-j", "--n-jobs", type=int, default=1, help="Configurations fitted in parallel.")
@run_options
@click.pass_context
def nsfit(
    ctx: click.Context,
    catalog: Optional[str],
    window: Optional[tuple[float, float]],
    mz: Optional[float],
    history_start: Optional[float],
    reference: Optional[str],
    models: Optional[str],
    changepoint: Optional[float],
    changepoint_weight: Optional[float],
    count_all_weights: bool,
    n_jobs: int,
    output_dir: Optional[str],
    run_name: Optional[str],
) -> None:
    """
    Fit nonstationary ETAS models and rank them by ΔABIC.

    Every configuration is compared with its own heavy-weight (near-flat)
    baseline; the scoreboard names the model with the smallest ΔABIC.

    \b
    Examples:
        nsetas nsfit -c demo/catalog.csv --reference demo/reference.json --models 1a,3a
        nsetas nsfit -c demo/catalog.csv --models all --changepoint 49.8 -j 4
    """
    quiet = ctx.obj.get("quiet", False)
    config = run_config(ctx)
    reference = pick(reference, config, "reference")
    changepoint = pick(changepoint, config, "changepoint")
    changepoint_weight = pick(changepoint_weight, config, "changepoint_weight")
    labels, notes = select_labels(pick(models, config, "models", "all"), changepoint is not None)

    try:
        data, catalog_path = load_catalog_option(ctx, catalog, window, mz, history_start)
        if not quiet:
            print_header(
                "Nonstationary ETAS inversion",
                f"{data.n_events} events, models {', '.join(labels)}",
            )
        for note in notes:
            print_warning(note)
        if reference:
            ref = load_params(reference)
        else:
            print_info("No --reference: using the maximum-likelihood fit of the catalog")
            ref = fit_mle(data, label="reference").params

        results = fit_configurations(
            data,
            labels,
            ref,
            changepoint=changepoint,
            changepoint_weight=changepoint_weight,
            count_all_weights=count_all_weights,
            n_jobs=n_jobs,
        )
        fits = [fit for fit, _ in results]
        board = scoreboard(fits)

        run_dir = open_run(ctx, "nsfit", run_name, output_dir)
        outputs: list[Path] = []
        for fit in fits:
            outputs += write_fit(run_dir, data, fit)
        outputs.append(export_to_json(board, run_dir / "scoreboard.json"))
        outputs.append(
            export_to_markdown(board["rows"], run_dir / "scoreboard.md", "ΔABIC scoreboard", SCORE_COLUMNS)
        )
        warnings = [f"{fit.label}: {w}" for fit in fits for w in fit.warnings]
        write_manifest(
            run_dir,
            "nsfit",
            {
                "catalog": catalog_path,
                "window": list(data.window),
                "threshold": data.threshold,
                "reference": ref.model_dump(),
                "models": labels,
                "changepoint": changepoint,
                "changepoint_weight": fits[0].changepoint_weight,
                "count_all_weights": count_all_weights,
            },
            outputs,
            notes + warnings,
        )
    except NsetasError as e:
        handle_error(e)

    if not quiet:
        print_table("ΔABIC scoreboard", board["rows"], SCORE_COLUMNS)
    print_success(f"Best model {board['winner']}; results in {run_dir}")
