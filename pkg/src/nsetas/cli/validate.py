"""
Validate command for nsetas CLI.

JSON Schema validation of the reports written by the other commands.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click
from rich.table import Table

from nsetas.core.exceptions import DataLoadError
from nsetas.core.schema import SchemaValidator

from .utils import console, print_error, print_success, print_warning


def collect_files(paths: tuple[str, ...]) -> list[Path]:
    """JSON files named directly, or found in the given run directories."""
    files: list[Path] = []
    for item in paths:
        path = Path(item)
        if path.is_dir():
            files += sorted(path.glob("*.json"))
        else:
            files.append(path)
    return files


@click.command()
@click.argument("paths", nargs=-1, type=click.Path(exists=True))
@click.option(
    "-s",
    "--schema",
    "schema_name",
    help="Schema to validate against (default: detected from the file name).",
)
@click.option("--list", "list_schemas", is_flag=True, help="List available schemas and exit.")
@click.pass_context
def validate(
    ctx: click.Context,
    paths: tuple[str, ...],
    schema_name: Optional[str],
    list_schemas: bool,
) -> None:
    """
    Validate report JSON files against the bundled schemas.

    PATHS are JSON files or run directories. Exits with status 1 when any
    file fails validation.

    \b
    Examples:
        nsetas validate runs/fit-20240101T000000Z
        nsetas validate runs/nsfit-demo/3a.json --schema bayes_fit
        nsetas validate --list
    """
    quiet = ctx.obj.get("quiet", False)
    validator = SchemaValidator()

    if list_schemas:
        table = Table(title="Available JSON Schemas", show_header=True)
        table.add_column("Schema Name", style="cyan")
        table.add_column("File", style="green")
        for name in sorted(validator.list_schemas()):
            table.add_row(name, validator.SCHEMA_MAP[name])
        console.print(table)
        return

    if not paths:
        raise click.UsageError("Give at least one file or run directory.")
    if schema_name and schema_name not in validator.SCHEMA_MAP:
        raise click.BadParameter(
            f"unknown schema (expected one of {', '.join(validator.list_schemas())})",
            param_hint="--schema",
        )

    failed = checked = 0
    for path in collect_files(paths):
        name = schema_name or validator.detect_schema(path)
        if name is None:
            if not quiet:
                print_warning(f"Skipping {path.name}: no schema matches its name")
            continue
        try:
            errors = validator.validate_file(path, name)
        except DataLoadError as e:
            print_error(str(e))
            failed += 1
            continue
        checked += 1
        if errors:
            failed += 1
            print_error(f"{path} does not conform to {name} ({len(errors)} error(s))")
            for error in errors[:10]:
                console.print(f"  [red]•[/red] {error}")
            if len(errors) > 10:
                console.print(f"  ... and {len(errors) - 10} more errors")
        elif not quiet:
            console.print(f"[green]✓[/green] {path.name} [dim]({name})[/dim]")

    if failed:
        print_error(f"{failed} file(s) failed validation")
        sys.exit(1)
    print_success(f"{checked} file(s) valid")
