"""
JSON Schema validation of the reports nsetas writes.

Every JSON document a CLI command emits has a Draft 7 schema under
``nsetas/schemas``. Validation is independent of the Pydantic models so
that reports can be checked by consumers that never import nsetas.

Usage:
    from nsetas.core.schema import SchemaValidator

    validator = SchemaValidator()
    errors = validator.validate_file("runs/fit-demo/fit.json", "fit_result")
    for error in errors:
        print(error)
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional, Union

from jsonschema import Draft7Validator

from nsetas.core.exceptions import DataLoadError
from nsetas.core.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SchemaError:
    """One schema violation; ``path`` is the dotted location in the document."""

    message: str
    path: str
    schema_path: str
    value: Any = None

    def __str__(self) -> str:
        return f"[{self.path}] {self.message}" if self.path else self.message

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class SchemaValidator:
    """
    Validates report JSON against the bundled Draft 7 schemas.

    Attributes:
        schemas_dir: Directory containing ``*.schema.json`` files
    """

    SCHEMA_MAP = {
        "fit_result": "fit_result.schema.json",
        "changepoint": "changepoint.schema.json",
        "anomaly_model": "anomaly_model.schema.json",
        "bayes_fit": "bayes_fit.schema.json",
        "scoreboard": "scoreboard.schema.json",
        "residual": "residual.schema.json",
        "sim_config": "sim_config.schema.json",
        "manifest": "manifest.schema.json",
    }

    # Fixed report file names written by the commands
    REPORT_FILES = {
        "manifest.json": "manifest",
        "fit.json": "fit_result",
        "changepoint.json": "changepoint",
        "scoreboard.json": "scoreboard",
        "sim_config.json": "sim_config",
        "residual.json": "residual",
    }

    def __init__(self, schemas_dir: Optional[Union[str, Path]] = None):
        self.schemas_dir = Path(schemas_dir) if schemas_dir else Path(__file__).parent.parent / "schemas"
        self._schema_cache: dict[str, dict[str, Any]] = {}

    def get_schema(self, schema_name: str) -> dict[str, Any]:
        """
        Load a schema by name.

        Raises:
            DataLoadError: If the schema is unknown or unreadable
        """
        if schema_name in self._schema_cache:
            return self._schema_cache[schema_name]

        schema_file = self.SCHEMA_MAP.get(schema_name)
        if schema_file is None:
            raise DataLoadError(
                f"Unknown schema '{schema_name}'. Available: {', '.join(self.list_schemas())}",
                details={"schema_name": schema_name},
            )
        schema_path = self.schemas_dir / schema_file
        if not schema_path.exists():
            raise DataLoadError(
                f"Schema file not found: {schema_path}",
                filepath=schema_path,
                details={"schema_name": schema_name},
            )

        try:
            with open(schema_path, encoding="utf-8") as f:
                schema: dict[str, Any] = json.load(f)
        except json.JSONDecodeError as e:
            raise DataLoadError(
                f"Invalid JSON in schema file: {e}",
                filepath=schema_path,
            ) from e
        self._schema_cache[schema_name] = schema
        logger.debug(f"Loaded schema: {schema_name}")
        return schema

    def validate_data(self, data: Any, schema_name: str) -> list[SchemaError]:
        """
        Validate data against a schema.

        Returns:
            List of validation errors (empty if valid)
        """
        validator = Draft7Validator(self.get_schema(schema_name))
        errors = []
        for error in sorted(validator.iter_errors(data), key=lambda e: list(e.path)):
            errors.append(
                SchemaError(
                    message=error.message,
                    path=".".join(str(p) for p in error.absolute_path),
                    schema_path=".".join(str(p) for p in error.schema_path),
                    value=error.instance if not isinstance(error.instance, (dict, list)) else None,
                )
            )
        return errors

    def validate_file(
        self, filepath: Union[str, Path], schema_name: str
    ) -> list[SchemaError]:
        """
        Validate a JSON file against a schema.

        Raises:
            DataLoadError: If the file cannot be read
        """
        filepath = Path(filepath)
        if not filepath.exists():
            raise DataLoadError(f"File not found: {filepath}", filepath=filepath)
        try:
            with open(filepath, encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise DataLoadError(f"Invalid JSON syntax: {e}", filepath=filepath) from e
        return self.validate_data(data, schema_name)

    def is_valid(self, data: Any, schema_name: str) -> bool:
        return not self.validate_data(data, schema_name)

    def list_schemas(self) -> list[str]:
        """Names accepted by ``get_schema``."""
        return list(self.SCHEMA_MAP.keys())

    def detect_schema(self, filepath: Union[str, Path]) -> Optional[str]:
        """
        Guess the schema of a report from its file name.

        ``*.model.json`` is an anomaly model; any other ``<label>.json`` in
        an ``nsfit-*`` run directory is a per-model report.
        """
        path = Path(filepath)
        if path.name.endswith(".model.json"):
            return "anomaly_model"
        if path.name in self.REPORT_FILES:
            return self.REPORT_FILES[path.name]
        if path.parent.name.startswith("nsfit-"):
            return "bayes_fit"
        return None
