"""
CLI Utility Functions.

Shared helpers for CLI commands: console output, option parsing, run
directories with manifests, and deterministic CSV / JSON / Markdown writers.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from collections.abc import Iterable, Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, NoReturn, Optional

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.tree import Tree

from nsetas import __version__
from nsetas.config.settings import RunConfig, get_settings
from nsetas.core.loader import read_catalog
from nsetas.models.catalog import Catalog
from nsetas.models.etas import PARAM_NAMES

# Initialize Rich console for formatted output
console = Console()
error_console = Console(stderr=True)


def print_success(message: str) -> None:
    """Print a success message in green."""
    console.print(f"[green]✓[/green] {message}")


def print_error(message: str) -> None:
    """Print an error message in red."""
    error_console.print(f"[red]✗ Error:[/red] {message}")


def print_warning(message: str) -> None:
    """Print a warning message in yellow."""
    console.print(f"[yellow]⚠[/yellow] {message}")


def print_info(message: str) -> None:
    """Print an info message."""
    console.print(f"[blue]ℹ[/blue] {message}")


def print_header(title: str, subtitle: str = "") -> None:
    """Print a styled header panel."""
    if subtitle:
        content = f"[bold white]{title}[/bold white]\n[dim]{subtitle}[/dim]"
    else:
        content = f"[bold white]{title}[/bold white]"
    console.print(Panel(content, border_style="blue", padding=(0, 2)))


def print_summary_tree(title: str, items: dict[str, Any]) -> None:
    """Print a tree view of summary items."""
    tree = Tree(f"[bold]{title}[/bold]")
    for key, value in items.items():
        if isinstance(value, dict):
            branch = tree.add(f"[cyan]{key}[/cyan]")
            for k, v in value.items():
                branch.add(f"{k}: [green]{v}[/green]")
        else:
            tree.add(f"{key}: [green]{value}[/green]")
    console.print(tree)


def print_table(title: str, rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> None:
    """Print rows as a Rich table."""
    table = Table(title=title, show_header=True)
    for column in columns:
        table.add_column(column, style="cyan" if column == columns[0] else None)
    for row in rows:
        table.add_row(*(_cell(row.get(c)) for c in columns))
    console.print(table)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "-"
    return str(value)


def handle_error(e: Exception) -> NoReturn:
    """Print the error and exit with the computational-failure code."""
    print_error(str(e))
    sys.exit(1)


# ==================== Options ====================


def run_config(ctx: click.Context) -> RunConfig:
    """The --config file of the current invocation (empty when absent)."""
    obj = ctx.find_root().obj or {}
    config = obj.get("config")
    return config if isinstance(config, RunConfig) else RunConfig()


def pick(value: Any, config: RunConfig, key: str, default: Any = None) -> Any:
    """Command-line value, else the run configuration's, else ``default``."""
    if value is not None:
        return value
    from_config = getattr(config, key, None)
    return default if from_config is None else from_config


def parse_window(
    ctx: Optional[click.Context], param: Optional[click.Parameter], value: Optional[str]
) -> Optional[tuple[float, float]]:
    """Click callback for "S,T" windows."""
    if value is None:
        return None
    try:
        start, end = (float(part) for part in value.split(","))
    except ValueError:
        raise click.BadParameter("expected START,END in days, e.g. 0,200") from None
    if start > end:
        raise click.BadParameter("START must not exceed END")
    return start, end


def parse_fix(values: Iterable[str]) -> tuple[dict[str, float], list[str]]:
    """
    Parse repeated --fix options.

    "p=1.0" fixes p at 1.0; a bare "p" fixes p at its starting value.

    Returns:
        (values to override in the starting point, names to fix)
    """
    overrides: dict[str, float] = {}
    names: list[str] = []
    for item in values:
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            name, _, raw = part.partition("=")
            name = name.strip().lower()
            if name not in PARAM_NAMES:
                raise click.BadParameter(
                    f"unknown parameter '{name}' (expected one of {', '.join(PARAM_NAMES)})",
                    param_hint="--fix",
                )
            if raw:
                try:
                    overrides[name] = float(raw)
                except ValueError:
                    raise click.BadParameter(f"bad value in '{part}'", param_hint="--fix") from None
            names.append(name)
    return overrides, names


def load_catalog_option(
    ctx: click.Context,
    catalog: Optional[str],
    window: Optional[tuple[float, float]],
    mz: Optional[float],
    history_start: Optional[float] = None,
) -> tuple[Catalog, Path]:
    """
    Read the catalog named on the command line or in the run configuration.

    Raises:
        click.UsageError: If no catalog is given at all
    """
    config = run_config(ctx)
    path = pick(catalog, config, "catalog")
    if path is None:
        raise click.UsageError("Missing option '--catalog' (or catalog= in --config).")
    if window is None and config.window_start is not None and config.window_end is not None:
        window = (config.window_start, config.window_end)
    mz = pick(mz, config, "threshold")
    history_start = pick(history_start, config, "history_start")

    loaded = read_catalog(path, window=window, threshold=mz, history_start=history_start)
    return loaded, Path(path).resolve()


# ==================== Run directories ====================


def default_run_name() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def open_run(
    ctx: click.Context,
    command: str,
    run_name: Optional[str],
    output_dir: Optional[str],
) -> Path:
    """Create ``<output_dir>/<command>-<run_name>`` and return it."""
    config = run_config(ctx)
    root = pick(output_dir, config, "output_dir")
    name = run_name or default_run_name()
    if root is None:
        run_dir = get_settings().run_dir(command, name)
    else:
        run_dir = Path(root).resolve() / f"{command}-{name}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_manifest(
    run_dir: Path,
    command: str,
    inputs: dict[str, Any],
    outputs: Sequence[Path],
    warnings: Sequence[str] = (),
) -> Path:
    """
    Record what a run read and wrote.

    The manifest holds no timestamps, so rerunning a command with the same
    flags reproduces it byte for byte.
    """
    manifest = {
        "command": command,
        "version": __version__,
        "inputs": {k: (str(v) if isinstance(v, Path) else v) for k, v in inputs.items()},
        "outputs": sorted(p.name for p in outputs),
        "warnings": list(warnings),
    }
    path = run_dir / "manifest.json"
    export_to_json(manifest, path)
    return path


# ==================== Writers ====================


def _finite(value: Any) -> Any:
    """Non-finite floats become null; containers are converted recursively."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def export_to_json(data: Any, filepath: Path, indent: int = 2) -> Path:
    """Export data to a JSON file (strict JSON, no NaN or Infinity)."""
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(_finite(data), f, indent=indent, ensure_ascii=False, allow_nan=False)
        f.write("\n")
    return filepath


def export_to_csv(
    rows: Sequence[dict[str, Any]], filepath: Path, fieldnames: Sequence[str]
) -> Path:
    """Export rows to CSV with floats in shortest round-trip form."""
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(row.get(k)) for k in fieldnames})
    return filepath


def _csv_value(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return value


def export_to_markdown(
    rows: Sequence[dict[str, Any]], filepath: Path, title: str, columns: Sequence[str]
) -> Path:
    """Export rows to a Markdown table."""
    if not rows:
        raise ValueError("No data to export")
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        f.write(f"# {title}\n\n")
        f.write("| " + " | ".join(columns) + " |\n")
        f.write("| " + " | ".join(["---"] * len(columns)) + " |\n")
        for row in rows:
            f.write("| " + " | ".join(_markdown_value(row.get(c)) for c in columns) + " |\n")
    return filepath


def _markdown_value(value: Any) -> str:
    if isinstance(value, bool):
        return "**winner**" if value else ""
    if isinstance(value, float):
        return f"{value:.4g}"
    return "" if value is None else str(value)


# ==================== Shared option groups ====================


def catalog_options(func: Any) -> Any:
    """--catalog, --window, --mz and --history-start."""
    func = click.option(
        "--history-start",
        type=float,
        help="Keep events from this time (days) as triggering history.",
    )(func)
    func = click.option(
        "--mz",
        type=float,
        help="Threshold magnitude (default: catalog header or minimum magnitude).",
    )(func)
    func = click.option(
        "--window",
        callback=parse_window,
        help="Observation window START,END in days.",
    )(func)
    func = click.option(
        "-c",
        "--catalog",
        type=click.Path(exists=True, dir_okay=False),
        help="Catalog CSV (time,magnitude or datetime,magnitude).",
    )(func)
    return func


def run_options(func: Any) -> Any:
    """--output-dir and --run-name."""
    func = click.option(
        "--run-name",
        help="Run directory suffix (default: UTC timestamp).",
    )(func)
    func = click.option(
        "-o",
        "--output-dir",
        type=click.Path(file_okay=False),
        help="Root for run directories (default: NSETAS_OUTPUT_DIR).",
    )(func)
    return func
