"""
Data loading utilities for nsetas.

This module reads and writes event catalogs in the catalog CSV format and
loads the JSON files the pipeline produces (parameter files, fit reports,
anomaly models). All loaded data is validated against the Pydantic models.

Catalog CSV:
    UTF-8, comma-separated, header row required, '#' comment lines ignored.
    Columns are "time,magnitude" (days since the origin) or
    "datetime,magnitude" (ISO-8601 timestamps). Other columns are ignored
    with a warning. Serialized catalogs carry their window, threshold,
    history start (when history events are present) and origin epoch in
    comment lines:

        # window_start=30.0
        # window_end=230.0
        # threshold=2.5
        # history_start=0.0
        # origin_epoch=2011-03-11T00:00:00+00:00
        time,magnitude
        12.513,3.1

Usage:
    from nsetas.core.loader import read_catalog, load_params

    catalog = read_catalog("demo/catalog.csv")
    params = load_params("demo/reference.json")
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, TypeVar, Union

from pydantic import BaseModel, ValidationError as PydanticValidationError

from nsetas.core.exceptions import DataLoadError, ValidationError
from nsetas.core.logging import get_logger
from nsetas.models.anomaly import AnomalyModel
from nsetas.models.catalog import Catalog, Event, event_sort_key
from nsetas.models.etas import EtasParams

logger = get_logger(__name__)

# Type variable for generic model loading
T = TypeVar("T", bound=BaseModel)

TIME_COLUMNS = ("time", "datetime")
MAGNITUDE_COLUMN = "magnitude"
HEADER_KEYS = ("window_start", "window_end", "threshold", "history_start", "origin_epoch")


# ==================== JSON ====================


def load_json(filepath: Union[str, Path]) -> dict[str, Any]:
    """
    Load a JSON file and return its contents as a dictionary.

    Args:
        filepath: Path to the JSON file

    Returns:
        Dictionary containing the parsed JSON data

    Raises:
        DataLoadError: If file cannot be read or parsed
    """
    filepath = Path(filepath)
    logger.debug(f"Loading JSON file: {filepath}")

    if not filepath.exists():
        raise DataLoadError(
            f"File not found: {filepath}",
            filepath=filepath,
            details={"error_type": "file_not_found"},
        )

    if not filepath.is_file():
        raise DataLoadError(
            f"Path is not a file: {filepath}",
            filepath=filepath,
            details={"error_type": "not_a_file"},
        )

    try:
        with open(filepath, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise DataLoadError(
            f"Invalid JSON syntax at line {e.lineno}, column {e.colno}: {e.msg}",
            filepath=filepath,
            line=e.lineno,
            details={"error_type": "json_parse_error", "column": e.colno},
        ) from e
    except OSError as e:
        raise DataLoadError(
            f"Error reading file: {e}",
            filepath=filepath,
            details={"error_type": "io_error"},
        ) from e

    if not isinstance(data, dict):
        raise DataLoadError(
            "Expected a JSON object at the top level",
            filepath=filepath,
            details={"error_type": "not_an_object"},
        )
    return data


def validate_model(
    data: dict[str, Any],
    model_class: type[T],
    filepath: Optional[Union[str, Path]] = None,
) -> T:
    """
    Validate data against a Pydantic model.

    Args:
        data: Dictionary data to validate
        model_class: Pydantic model class to validate against
        filepath: Optional filepath for error messages

    Returns:
        Validated model instance

    Raises:
        ValidationError: If data doesn't match the model schema
    """
    try:
        return model_class.model_validate(data)
    except PydanticValidationError as e:
        errors = []
        for error in e.errors():
            field = ".".join(str(loc) for loc in error["loc"])
            errors.append(f"  - {field}: {error['msg']}")

        error_msg = f"Validation failed with {len(e.errors())} error(s):\n" + "\n".join(
            errors
        )
        raise ValidationError(
            error_msg,
            details={
                "model": model_class.__name__,
                "filepath": str(filepath) if filepath else None,
                "errors": [err["msg"] for err in e.errors()],
            },
        ) from e


def load_params(filepath: Union[str, Path]) -> EtasParams:
    """
    Load ETAS parameters from a bare {mu,k0,c,alpha,p} object or a fit report.

    Fit reports (the JSON written by ``nsetas fit``) and anomaly-model files
    keep the parameters under "params" and "reference" respectively.
    """
    data = load_json(filepath)
    for key in ("params", "reference"):
        if isinstance(data.get(key), dict):
            data = data[key]
            break
    params = validate_model(data, EtasParams, filepath)
    logger.debug(f"Loaded reference parameters from {filepath}")
    return params


def load_anomaly_model(filepath: Union[str, Path]) -> AnomalyModel:
    """
    Load an anomaly model written by ``nsetas nsfit``.

    Accepts either the model file itself or a per-model fit report whose
    "map_ref" entry points at it (relative to the report's directory).
    """
    filepath = Path(filepath)
    data = load_json(filepath)
    if "knots" not in data and isinstance(data.get("map_ref"), str):
        target = Path(data["map_ref"])
        if not target.is_absolute():
            target = filepath.parent / target
        logger.debug(f"Following map_ref {target}")
        return load_anomaly_model(target)
    data = {k: v for k, v in data.items() if k != "label"}
    return validate_model(data, AnomalyModel, filepath)


# ==================== Catalog CSV ====================


def _parse_timestamp(text: str) -> datetime:
    value = text.strip()
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    stamp = datetime.fromisoformat(value)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def _parse_float(text: str, column: str, line: int, source: Optional[str]) -> float:
    try:
        value = float(text)
    except ValueError as e:
        raise DataLoadError(
            f"Column '{column}' is not a number: {text!r}",
            filepath=source,
            line=line,
        ) from e
    if not math.isfinite(value):
        raise DataLoadError(
            f"Column '{column}' must be finite, got {text!r}",
            filepath=source,
            line=line,
        )
    return value


def _read_header_comment(line: str, meta: dict[str, str]) -> None:
    body = line.lstrip("#").strip()
    if "=" not in body:
        return
    key, _, value = body.partition("=")
    key = key.strip().lower()
    if key in HEADER_KEYS:
        meta[key] = value.strip()


def parse_catalog(
    text: str,
    *,
    window: Optional[tuple[float, float]] = None,
    threshold: Optional[float] = None,
    history_start: Optional[float] = None,
    source: Optional[Union[str, Path]] = None,
) -> Catalog:
    """
    Parse catalog CSV text.

    Events are sorted by (time, magnitude descending, input order). The
    window, threshold and history start come from the arguments, else from
    the comment header (the header history start only together with the
    header window). Otherwise the window spans the first and last events,
    Mz is the smallest magnitude and the history start is S.
    Events in [history_start, S) are kept as history-only events. Earlier
    events, events after T and events below Mz are dropped.

    Args:
        text: CSV text
        window: Optional (S, T) override
        threshold: Optional Mz override
        history_start: Optional start of the history window (at most S)
        source: File name used in error messages

    Returns:
        The parsed Catalog

    Raises:
        DataLoadError: On an empty stream, a missing header column, a
            malformed row (with its line number) or non-finite values
    """
    where = str(source) if source else None
    meta: dict[str, str] = {}
    header: Optional[list[str]] = None
    header_line = 0
    rows: list[tuple[int, list[str]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is None:
                _read_header_comment(line, meta)
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header = [f.strip().lower() for f in fields]
            header_line = lineno
        else:
            rows.append((lineno, fields))

    if header is None:
        raise DataLoadError("Catalog stream is empty (no header row)", filepath=where)

    time_column = next((c for c in TIME_COLUMNS if c in header), None)
    if time_column is None or MAGNITUDE_COLUMN not in header:
        raise DataLoadError(
            "Header must declare 'time,magnitude' or 'datetime,magnitude'",
            filepath=where,
            line=header_line,
            details={"header": header},
        )
    time_idx = header.index(time_column)
    mag_idx = header.index(MAGNITUDE_COLUMN)

    ignored = [c for c in header if c not in (time_column, MAGNITUDE_COLUMN)]
    if ignored:
        from nsetas.config.settings import get_settings

        message = f"Ignoring catalog column(s): {', '.join(ignored)}"
        if get_settings().strict_mode:
            raise DataLoadError(message, filepath=where, line=header_line)
        logger.warning(message)

    raw_times: list[Any] = []
    magnitudes: list[float] = []
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise DataLoadError(
                f"Expected {len(header)} fields, found {len(fields)}",
                filepath=where,
                line=lineno,
            )
        magnitudes.append(_parse_float(fields[mag_idx], MAGNITUDE_COLUMN, lineno, where))
        if time_column == "time":
            value = _parse_float(fields[time_idx], "time", lineno, where)
            if value < 0:
                raise DataLoadError(
                    f"Event time must be non-negative, got {value}",
                    filepath=where,
                    line=lineno,
                )
            raw_times.append(value)
        else:
            try:
                raw_times.append(_parse_timestamp(fields[time_idx]))
            except ValueError as e:
                raise DataLoadError(
                    f"Invalid ISO-8601 timestamp: {fields[time_idx]!r}",
                    filepath=where,
                    line=lineno,
                ) from e

    origin_epoch = meta.get("origin_epoch") or None
    if time_column == "datetime":
        origin = _parse_timestamp(origin_epoch) if origin_epoch else min(raw_times, default=None)
        if origin is not None:
            origin_epoch = origin.isoformat()
            raw_times = [(stamp - origin).total_seconds() / 86400.0 for stamp in raw_times]

    try:
        events = [
            Event(time=t, magnitude=m) for t, m in zip(raw_times, magnitudes)
        ]
    except PydanticValidationError as e:
        raise DataLoadError(
            f"Invalid event: {e.errors()[0]['msg']}", filepath=where
        ) from e
    events = [e for _, e in sorted(enumerate(events), key=lambda ie: event_sort_key(*ie))]

    if window is None:
        if "window_start" in meta and "window_end" in meta:
            window = (float(meta["window_start"]), float(meta["window_end"]))
            if history_start is None and "history_start" in meta:
                history_start = float(meta["history_start"])
        elif events:
            window = (events[0].time, events[-1].time)
        else:
            raise DataLoadError(
                "Catalog has no events and declares no window", filepath=where
            )
    if threshold is None:
        if "threshold" in meta:
            threshold = float(meta["threshold"])
        else:
            threshold = min(e.magnitude for e in events) if events else 0.0

    start, end = float(window[0]), float(window[1])
    if start > end:
        raise ValidationError(
            "window start must not exceed window end", field="window", value=window
        )
    hist = start if history_start is None else float(history_start)
    if hist > start:
        raise ValidationError(
            "history_start must not exceed the window start",
            field="history_start",
            value=history_start,
        )
    kept = [
        e.model_copy(update={"history": e.time < start})
        for e in events
        if hist <= e.time <= end and e.magnitude >= threshold
    ]
    catalog = Catalog(
        events=tuple(kept),
        window_start=start,
        window_end=end,
        threshold=float(threshold),
        origin_epoch=origin_epoch,
    )
    logger.debug(
        f"Parsed {catalog.n_events} events ({catalog.n_history} history) from {where or '<stream>'}"
    )
    return catalog


def serialize_catalog(catalog: Catalog) -> str:
    """
    Render a catalog as CSV text with its window, threshold, history and origin header.

    Floats are written with ``repr`` so that parsing the output returns an
    identical catalog.
    """
    buffer = io.StringIO()
    buffer.write(f"# window_start={catalog.window_start!r}\n")
    buffer.write(f"# window_end={catalog.window_end!r}\n")
    buffer.write(f"# threshold={catalog.threshold!r}\n")
    if catalog.n_history:
        buffer.write(f"# history_start={catalog.events[0].time!r}\n")
    if catalog.origin_epoch:
        buffer.write(f"# origin_epoch={catalog.origin_epoch}\n")
    buffer.write("time,magnitude\n")
    for event in catalog.events:
        buffer.write(f"{event.time!r},{event.magnitude!r}\n")
    return buffer.getvalue()


def read_catalog(
    filepath: Union[str, Path],
    *,
    window: Optional[tuple[float, float]] = None,
    threshold: Optional[float] = None,
    history_start: Optional[float] = None,
) -> Catalog:
    """
    Read a catalog CSV file.

    Raises:
        DataLoadError: If the file cannot be read or parsed
    """
    filepath = Path(filepath)
    if not filepath.is_file():
        raise DataLoadError(
            f"Catalog not found: {filepath}",
            filepath=filepath,
            details={"error_type": "file_not_found"},
        )
    try:
        text = filepath.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataLoadError(f"Error reading catalog: {e}", filepath=filepath) from e
    catalog = parse_catalog(
        text, window=window, threshold=threshold, history_start=history_start, source=filepath
    )
    logger.info(f"Loaded {catalog.n_events} events from {filepath.name}")
    return catalog


def write_catalog(catalog: Catalog, filepath: Union[str, Path]) -> Path:
    """Write a catalog in the serialized CSV form."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    filepath.write_text(serialize_catalog(catalog), encoding="utf-8")
    logger.debug(f"Wrote {len(catalog.events)} events to {filepath}")
    return filepath
