"""
Pytest configuration and shared fixtures for the nsetas test suite.

This module provides:
- Settings isolation (output directory under a temporary path)
- Reference ETAS parameters and small hand-built catalogs
- Simulated catalogs with fixed seeds
- Catalog, parameter and run-configuration files for CLI tests
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any, Generator

import pytest

if TYPE_CHECKING:
    from nsetas.models.catalog import Catalog
    from nsetas.models.etas import EtasParams


# ==================== Settings Fixtures ====================


@pytest.fixture(autouse=True)
def isolated_settings(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> Generator[Path, None, None]:
    """Point NSETAS_OUTPUT_DIR at a temporary directory and reset the singleton."""
    from nsetas.config.settings import reset_settings

    output_dir = tmp_path / "runs"
    monkeypatch.setenv("NSETAS_OUTPUT_DIR", str(output_dir))
    monkeypatch.delenv("NSETAS_LOG_LEVEL", raising=False)
    monkeypatch.delenv("NSETAS_DEBUG_THINNING", raising=False)
    reset_settings()
    yield output_dir
    reset_settings()


@pytest.fixture
def env_settings(monkeypatch: pytest.MonkeyPatch) -> None:
    """Set environment variables for settings tests."""
    from nsetas.config.settings import reset_settings

    monkeypatch.setenv("NSETAS_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("NSETAS_STRICT_MODE", "true")
    monkeypatch.setenv("NSETAS_HEAVY_WEIGHT", "1e5")
    reset_settings()


# ==================== Model Fixtures ====================


@pytest.fixture
def reference_params() -> "EtasParams":
    """Subcritical ETAS parameters used across the suite."""
    from nsetas.models.etas import EtasParams

    return EtasParams(mu=0.5, k0=0.02, c=0.01, alpha=1.0, p=1.2)


@pytest.fixture
def small_catalog() -> "Catalog":
    """Eight in-window events on [1, 11] and one history event."""
    from nsetas.models.catalog import Catalog, Event

    events = [Event(time=0.5, magnitude=4.0, history=True)] + [
        Event(time=t, magnitude=m)
        for t, m in [
            (1.2, 3.1),
            (1.25, 2.6),
            (2.0, 2.9),
            (3.7, 3.4),
            (3.75, 2.5),
            (5.5, 2.7),
            (8.1, 3.0),
            (10.4, 2.6),
        ]
    ]
    return Catalog(events=tuple(events), window_start=1.0, window_end=11.0, threshold=2.5)


@pytest.fixture
def simulated_catalog(reference_params: "EtasParams") -> "Catalog":
    """Stationary ETAS catalog on [0, 300] with a fixed seed."""
    from nsetas.etas.simulation import simulate_thinning
    from nsetas.models.simulation import SimConfig

    config = SimConfig(
        params=reference_params, window_end=300.0, b_value=1.0, m_c=2.5, seed=11
    )
    return simulate_thinning(config).catalog


# ==================== File Fixtures ====================


@pytest.fixture
def catalog_file(tmp_path: Path, simulated_catalog: "Catalog") -> Path:
    """The simulated catalog written as CSV."""
    from nsetas.core.loader import write_catalog

    return write_catalog(simulated_catalog, tmp_path / "catalog.csv")


@pytest.fixture
def params_file(tmp_path: Path, reference_params: "EtasParams") -> Path:
    """Reference parameters as a bare JSON object."""
    path = tmp_path / "reference.json"
    path.write_text(json.dumps(reference_params.model_dump()), encoding="utf-8")
    return path


@pytest.fixture
def run_config_file(tmp_path: Path, catalog_file: Path, params_file: Path) -> Path:
    """A key=value run configuration pointing at the catalog and reference files."""
    path = tmp_path / "run.env"
    path.write_text(
        "\n".join(
            [
                f"catalog={catalog_file.name}",
                f"reference={params_file.name}",
                "changepoint=150",
                "seed=5",
                "output_dir=cfg-runs",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    return path


# ==================== Helpers ====================


def read_json(path: Path) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def json_reader() -> Any:
    """Expose read_json to tests."""
    return read_json
