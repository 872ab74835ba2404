"""
Init command for nsetas CLI.

Initializes a project directory with a settings file, a run configuration,
reference parameters and a deterministic demo catalog.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import click

from nsetas.core.exceptions import NsetasError
from nsetas.core.loader import write_catalog
from nsetas.etas.simulation import simulate_thinning
from nsetas.models.anomaly import AnomalyModel, Restriction, SmoothingDomain
from nsetas.models.etas import EtasParams
from nsetas.models.simulation import SimConfig

from .utils import (
    export_to_json,
    handle_error,
    print_header,
    print_info,
    print_success,
    print_warning,
)

DEMO_SEED = 20240101
DEMO_WINDOW = (0.0, 400.0)
DEMO_CHANGEPOINT = 200.0
DEMO_B_VALUE = 1.273
DEMO_MC = 2.5
DEMO_REFERENCE = EtasParams(mu=0.35, k0=0.02, c=0.01, alpha=1.2, p=1.1)

ENV_TEMPLATE = """\
# nsetas settings (NSETAS_ prefix); see `nsetas --help`
NSETAS_OUTPUT_DIR=runs
NSETAS_LOG_LEVEL=INFO
"""

RUN_TEMPLATE = f"""\
# Run configuration: pass with `nsetas --config run.env <command>`
catalog=catalog.csv
reference=reference.json
threshold={DEMO_MC}
changepoint={DEMO_CHANGEPOINT}
models=all
seed=7
output_dir=runs
"""


def demo_model() -> AnomalyModel:
    """Reference model whose background rate doubles at the change point."""
    start, end = DEMO_WINDOW
    knots = (start, DEMO_CHANGEPOINT - 0.5, DEMO_CHANGEPOINT + 0.5, end)
    return AnomalyModel(
        knots=knots,
        q_mu=(1.0, 1.0, 2.0, 2.0),
        q_k=(1.0, 1.0, 1.0, 1.0),
        restriction=Restriction.FIX_QK,
        smoothing_domain=SmoothingDomain.ORDINARY,
        changepoint=DEMO_CHANGEPOINT,
        reference=DEMO_REFERENCE,
    )


def demo_config() -> SimConfig:
    return SimConfig(
        anomaly=demo_model(),
        window_start=DEMO_WINDOW[0],
        window_end=DEMO_WINDOW[1],
        b_value=DEMO_B_VALUE,
        m_c=DEMO_MC,
        seed=DEMO_SEED,
    )


def _write(path: Path, force: bool, verbose: bool, writer: Callable[[Path], object]) -> bool:
    """Run ``writer`` unless the file exists and --force is not given."""
    if path.exists() and not force:
        print_warning(f"Skipping existing file: {path.name} (use --force to overwrite)")
        return False
    writer(path)
    if verbose:
        print_info(f"Wrote {path}")
    return True


@click.command()
@click.argument("directory", type=click.Path(file_okay=False))
@click.option("--force", is_flag=True, help="Overwrite existing files.")
@click.pass_context
def init(ctx: click.Context, directory: str, force: bool) -> None:
    """
    Initialize a project directory with a demo catalog.

    The demo catalog is simulated with a fixed seed from a reference model
    whose background rate doubles at t = 200 days, so every command can be
    tried without external data.

    \b
    Examples:
        nsetas init demo
        nsetas --config demo/run.env nsfit
    """
    verbose = ctx.obj.get("verbose", False)
    project = Path(directory)
    project.mkdir(parents=True, exist_ok=True)
    print_header("Initializing nsetas project", str(project.resolve()))

    try:
        written = [
            _write(project / ".env", force, verbose, lambda p: p.write_text(ENV_TEMPLATE, encoding="utf-8")),
            _write(project / "run.env", force, verbose, lambda p: p.write_text(RUN_TEMPLATE, encoding="utf-8")),
            _write(
                project / "reference.json",
                force,
                verbose,
                lambda p: export_to_json(DEMO_REFERENCE.model_dump(), p),
            ),
        ]
        catalog_path = project / "catalog.csv"
        if catalog_path.exists() and not force:
            print_warning("Skipping existing file: catalog.csv (use --force to overwrite)")
        else:
            result = simulate_thinning(demo_config())
            write_catalog(result.catalog, catalog_path)
            written.append(True)
            print_info(f"Demo catalog: {result.catalog.n_events} events on {DEMO_WINDOW}")
    except NsetasError as e:
        handle_error(e)

    print_success(f"Project initialized ({sum(written)} files written)")
    print_info("Next steps:")
    print_info(f"  1. cd {project}")
    print_info("  2. nsetas --config run.env fit")
    print_info("  3. nsetas --config run.env nsfit -j 4")
