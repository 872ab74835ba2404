"""
Simulate command for nsetas CLI.

Synthetic catalogs by thinning from a stationary or a fitted nonstationary
ETAS model, with an optional simulate-and-recover check.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import click
from pydantic import ValidationError as PydanticValidationError

from nsetas.core.exceptions import NsetasError
from nsetas.core.loader import load_anomaly_model, load_params, write_catalog
from nsetas.etas.simulation import roundtrip_recover, simulate_thinning
from nsetas.models.simulation import SimConfig, SimulationResult

from .plots import Series, render_chart
from .utils import (
    export_to_json,
    handle_error,
    open_run,
    parse_window,
    pick,
    print_header,
    print_success,
    print_summary_tree,
    print_warning,
    run_config,
    run_options,
    write_manifest,
)


def sim_report(config: SimConfig, result: SimulationResult) -> dict[str, Any]:
    """sim_config.json: the full configuration and the thinning diagnostics."""
    return {
        "config": config.model_dump(mode="json"),
        "n_events": result.catalog.n_events,
        "truncated": result.truncated,
        "branching_ratio": result.branching_ratio,
        "candidates": result.candidates,
        "rejected": result.rejected,
        "warnings": list(result.warnings),
    }


def write_scatter(run_dir: Path, result: SimulationResult) -> Path:
    """Magnitude against time."""
    catalog = result.catalog
    return render_chart(
        run_dir / "catalog.svg",
        f"Simulated catalog ({catalog.n_events} events)",
        [Series("events", catalog.times, catalog.magnitudes, style="dots")],
        ylabel="magnitude",
    )


def build_config(
    params_path: Optional[str],
    model_path: Optional[str],
    window: Optional[tuple[float, float]],
    **options: Any,
) -> SimConfig:
    """
    SimConfig from the model source and window.

    The window of a nonstationary model defaults to its knot range.
    """
    anomaly = load_anomaly_model(model_path) if model_path else None
    params = load_params(params_path) if params_path else None
    if window is None:
        if anomaly is None:
            raise click.UsageError("Missing option '--window' for a stationary model.")
        window = (anomaly.knots[0], anomaly.knots[-1])
    try:
        return SimConfig(
            params=params,
            anomaly=anomaly,
            window_start=window[0],
            window_end=window[1],
            **options,
        )
    except PydanticValidationError as e:
        raise click.BadParameter(e.errors()[0]["msg"]) from None


@click.command()
@click.option(
    "--params",
    "params_path",
    type=click.Path(exists=True, dir_okay=False),
    help="Stationary ETAS parameters (params JSON or fit report).",
)
@click.option(
    "--model",
    "--from-bayesfit",
    "model_path",
    type=click.Path(exists=True, dir_okay=False),
    help="Nonstationary model to replay (model file or per-model nsfit report).",
)
@click.option("--window", callback=parse_window, help="Window START,END in days.")
@click.option("--seed", type=click.IntRange(min=0), help="Random seed (required here or in --config).")
@click.option("--b", "b_value", type=float, default=1.0, show_default=True, help="Gutenberg-Richter b.")
@click.option("--mc", "m_c", type=float, default=2.5, show_default=True, help="Completeness magnitude.")
@click.option(
    "--max-events",
    type=click.IntRange(min=1),
    default=100_000,
    show_default=True,
    help="Stop (and flag truncation) after this many events.",
)
@click.option("--origin-epoch", help="ISO date of t = 0, written to the catalog header.")
@click.option(
    "--recover",
    is_flag=True,
    help="Refit the simulated catalog and report 2-sigma coverage of the true factors.",
)
@click.option(
    "--anchoring",
    type=click.Choice(["positional", "temporal"]),
    default="positional",
    show_default=True,
    help="Change-point placement in the recovery fit.",
)
@run_options
@click.pass_context
def simulate(
    ctx: click.Context,
    params_path: Optional[str],
    model_path: Optional[str],
    window: Optional[tuple[float, float]],
    seed: Optional[int],
    b_value: float,
    m_c: float,
    max_events: int,
    origin_epoch: Optional[str],
    recover: bool,
    anchoring: str,
    output_dir: Optional[str],
    run_name: Optional[str],
) -> None:
    """
    Simulate an ETAS catalog by thinning.

    Writes catalog.csv (readable by every other command), sim_config.json
    and catalog.svg. The same --seed always gives the same files.

    \b
    Examples:
        nsetas simulate --params demo/reference.json --window 0,400 --seed 7
        nsetas simulate --model runs/nsfit-x/3a-cp.json --b 1.273 --mc 2.5 --seed 1 --recover
    """
    quiet = ctx.obj.get("quiet", False)
    if params_path and model_path:
        raise click.UsageError("--params and --model are mutually exclusive.")
    config_file = run_config(ctx)
    seed = pick(seed, config_file, "seed")
    if seed is None:
        raise click.UsageError("Missing option '--seed'.")
    if not model_path:
        params_path = pick(params_path, config_file, "reference")
    if not params_path and not model_path:
        raise click.UsageError("Give --params or --model.")
    if recover and not model_path:
        raise click.UsageError("--recover needs a nonstationary --model.")
    if window is None and config_file.window_start is not None and config_file.window_end is not None:
        window = (config_file.window_start, config_file.window_end)

    try:
        config = build_config(
            params_path,
            model_path,
            window,
            b_value=b_value,
            m_c=m_c,
            seed=seed,
            max_events=max_events,
            origin_epoch=origin_epoch,
        )
        if not quiet:
            source = "nonstationary model" if config.anomaly else "stationary model"
            print_header("Thinning simulation", f"{source} on {config.window}, seed {seed}")
        result = simulate_thinning(config)

        run_dir = open_run(ctx, "simulate", run_name, output_dir)
        outputs = [
            write_catalog(result.catalog, run_dir / "catalog.csv"),
            export_to_json(sim_report(config, result), run_dir / "sim_config.json"),
            write_scatter(run_dir, result),
        ]
        warnings = list(result.warnings)
        recovery = None
        if recover:
            recovery = roundtrip_recover(config, anchoring=anchoring)  # type: ignore[arg-type]
            outputs.append(export_to_json(recovery.to_report(), run_dir / "recovery.json"))
            warnings += list(recovery.warnings)
        write_manifest(
            run_dir,
            "simulate",
            {
                "params": params_path,
                "model": model_path,
                "window": list(config.window),
                "seed": seed,
                "b_value": b_value,
                "m_c": m_c,
                "max_events": max_events,
                "recover": recover,
                "anchoring": anchoring,
            },
            outputs,
            warnings,
        )
    except NsetasError as e:
        handle_error(e)

    if not quiet:
        summary: dict[str, Any] = {
            "events": result.catalog.n_events,
            "branching ratio": round(result.branching_ratio, 4),
            "candidates": result.candidates,
            "rejected": result.rejected,
        }
        if recovery is not None:
            summary["recovery"] = {
                "knots checked": recovery.knots_checked,
                "coverage mu": recovery.coverage_mu,
                "coverage K0": recovery.coverage_k,
            }
        print_summary_tree("Simulation", summary)
        for message in warnings:
            print_warning(message)
    print_success(f"{result.catalog.n_events} events; results in {run_dir}")
