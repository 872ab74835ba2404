"""
nsetas CLI package.

Command-line interface for stationary and nonstationary ETAS analysis.
"""

from typing import Optional

import click

from nsetas import __version__
from nsetas.config.settings import RunConfig
from nsetas.core.exceptions import ConfigurationError

from .changepoint import changepoint
from .fit import fit
from .init import init
from .nsfit import nsfit
from .residual import residual
from .simulate import simulate
from .validate import validate


@click.group()
@click.version_option(version=__version__, prog_name="nsetas")
@click.option(
    "-v", "--verbose",
    is_flag=True,
    help="Enable verbose output (DEBUG logging).",
)
@click.option(
    "-q", "--quiet",
    is_flag=True,
    help="Suppress non-essential output.",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    help="Run configuration file (key=value); flags override its values.",
)
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool, config_path: Optional[str]) -> None:
    """
    Nonstationary ETAS modelling CLI.

    Fits ETAS models to earthquake catalogs, tests for change points, and
    estimates time-varying background rate and productivity.
    Use --help on any command for more details.

    \b
    Quick Start:
        nsetas init demo                        Create a demo project
        nsetas fit -c demo/catalog.csv          Stationary MLE fit
        nsetas changepoint -c demo/catalog.csv --t0 200
        nsetas nsfit -c demo/catalog.csv --models all --changepoint 200
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["quiet"] = quiet

    # Configure logging from settings
    from nsetas.core.logging import configure_from_settings
    configure_from_settings("DEBUG" if verbose else "WARNING" if quiet else None)

    ctx.obj["config"] = None
    if config_path:
        try:
            ctx.obj["config"] = RunConfig.from_file(config_path)
        except ConfigurationError as e:
            raise click.BadParameter(str(e), param_hint="--config") from None


# Register all commands
cli.add_command(init)
cli.add_command(fit)
cli.add_command(changepoint)
cli.add_command(nsfit)
cli.add_command(residual)
cli.add_command(simulate)
cli.add_command(validate)


def main() -> None:
    """Entry point for the CLI."""
    cli(obj={})


# Alias main to cli for Click's CliRunner compatibility
main.name = cli.name  # type: ignore


if __name__ == "__main__":
    main()
