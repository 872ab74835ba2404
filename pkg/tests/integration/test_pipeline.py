"""
Integration tests for the nsetas command pipeline.

These tests run the commands end to end on the demo project created by
``nsetas init``: stationary fit, change-point test, nonstationary
inversion, residual analysis, simulation from a fitted model and schema
validation of every report.
"""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from nsetas.cli import cli
from nsetas.core.schema import SchemaValidator


# ============================================================================
# Test Fixtures
# ============================================================================


@pytest.fixture
def cli_runner():
    """Create a Click CLI test runner."""
    return CliRunner()


@pytest.fixture
def demo_project(tmp_path, cli_runner) -> Path:
    """A project initialized by ``nsetas init``."""
    project = tmp_path / "demo"
    result = cli_runner.invoke(cli, ["init", str(project)])
    assert result.exit_code == 0, result.output
    return project


@pytest.fixture
def invoke(cli_runner, demo_project):
    """Run a command with the demo project's run configuration."""

    def run(*args: str) -> Path:
        result = cli_runner.invoke(cli, ["--config", str(demo_project / "run.env"), *args])
        assert result.exit_code == 0, result.output
        return demo_project / "runs"

    return run


def load(path: Path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# ============================================================================
# Full Pipeline Integration Tests
# ============================================================================


@pytest.mark.integration
class TestDemoPipeline:
    """The demo catalog has a background rate that doubles at t = 200."""

    def test_fit(self, invoke):
        runs = invoke("fit", "--run-name", "demo", "--b-value", "1.273")
        report = load(runs / "fit-demo" / "fit.json")

        assert report["window"] == [0.0, 400.0]
        assert report["n_events"] > 100
        assert 0 < report["branching_ratio"] < 1

    def test_changepoint_detected(self, invoke):
        runs = invoke("changepoint", "--run-name", "demo")
        report = load(runs / "changepoint-demo" / "changepoint.json")

        assert report["t0"] == 200.0
        assert report["fits"]["whole"]["fixed"] == ["c", "alpha", "p"]
        assert report["fits"]["after"]["params"]["mu"] > report["fits"]["before"]["params"]["mu"]
        assert report["significant"]

    def test_nsfit_and_residual(self, invoke):
        runs = invoke("nsfit", "-m", "1a,1a′", "--run-name", "demo")
        out = runs / "nsfit-demo"
        board = load(out / "scoreboard.json")
        rows = {row["label"]: row for row in board["rows"]}

        assert set(rows) == {"1a", "1a′"}
        assert all(row["delta_abic"] <= 0 for row in rows.values())
        assert rows["1a′"]["delta_abic"] < 0

        model = load(out / "1a-cp.model.json")
        knots = model["knots"]
        before = [q for t, q in zip(knots, model["q_mu"]) if t < 190]
        after = [q for t, q in zip(knots, model["q_mu"]) if t > 210]
        assert sum(after) / len(after) > sum(before) / len(before)

        invoke("residual", "--model", str(out / "1a-cp.json"), "--run-name", "demo")
        residual = load(runs / "residual-demo" / "residual.json")
        assert residual["model"] == "1a′"
        assert 0.8 < residual["count_ratio"] < 1.25

    def test_simulate_from_fitted_model(self, invoke):
        runs = invoke("nsfit", "-m", "1a′", "--run-name", "demo")
        invoke("simulate", "--model", str(runs / "nsfit-demo" / "1a-cp.json"), "--b", "1.273", "--run-name", "demo")
        report = load(runs / "simulate-demo" / "sim_config.json")

        assert report["config"]["window_start"] == 0.0
        assert report["config"]["window_end"] == 400.0
        assert report["config"]["seed"] == 7
        assert report["n_events"] > 0

    def test_every_report_validates(self, invoke, cli_runner):
        invoke("fit", "--run-name", "demo")
        invoke("changepoint", "--run-name", "demo")
        runs = invoke("nsfit", "-m", "2a′", "--run-name", "demo")
        invoke("residual", "--run-name", "demo")
        invoke("simulate", "--window", "0,100", "--run-name", "demo")

        validator = SchemaValidator()
        checked = 0
        for path in sorted(runs.glob("*/*.json")):
            name = validator.detect_schema(path)
            if name is None:
                continue
            assert validator.validate_file(path, name) == [], path
            checked += 1
        assert checked >= 11

        result = cli_runner.invoke(cli, ["validate", *map(str, sorted(runs.iterdir()))])
        assert result.exit_code == 0, result.output

    def test_rerun_is_byte_identical(self, invoke):
        runs = invoke("nsfit", "-m", "1a", "--run-name", "one")
        invoke("nsfit", "-m", "1a", "--run-name", "two")
        for path in sorted((runs / "nsfit-one").iterdir()):
            assert path.read_bytes() == (runs / "nsfit-two" / path.name).read_bytes(), path.name
