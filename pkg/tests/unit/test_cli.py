"""
Tests for the nsetas CLI.

This module tests the Click-based command-line interface including:
- Command group structure and global options
- Usage errors (exit status 2) and computational failures (exit status 1)
- Output files of every command and their reproducibility
"""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from nsetas.cli import cli, main


# ============================================================================
# Test Fixtures
# ============================================================================


@pytest.fixture
def cli_runner():
    """Create a Click CLI test runner."""
    return CliRunner()


@pytest.fixture
def small_catalog_file(tmp_path, small_catalog) -> Path:
    """The hand-built catalog written as CSV."""
    from nsetas.core.loader import write_catalog

    return write_catalog(small_catalog, tmp_path / "small.csv")


def run_dir(output_dir: Path, command: str, name: str = "test") -> Path:
    return output_dir / f"{command}-{name}"


# ============================================================================
# CLI Structure Tests
# ============================================================================


class TestCLIStructure:
    """Test CLI command structure."""

    def test_main_entrypoint(self, cli_runner):
        result = cli_runner.invoke(main, ["--help"])
        assert result.exit_code == 0

    def test_cli_help(self, cli_runner):
        result = cli_runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        for command in ("init", "fit", "changepoint", "nsfit", "residual", "simulate", "validate"):
            assert command in result.output

    def test_cli_version(self, cli_runner):
        from nsetas import __version__

        result = cli_runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output


# ============================================================================
# Usage Errors
# ============================================================================


class TestUsageErrors:
    """Bad invocations exit with status 2 before any computation."""

    @pytest.mark.parametrize(
        "args",
        [
            ["fit"],
            ["fit", "-c", "{catalog}", "--window", "5"],
            ["fit", "-c", "{catalog}", "--window", "9,1"],
            ["changepoint", "-c", "{catalog}"],
            ["nsfit", "-c", "{catalog}", "--models", "4c"],
            ["nsfit", "-c", "{catalog}", "--models", "1a′"],
            ["simulate", "--params", "{params}", "--window", "0,10"],
            ["simulate", "--params", "{params}", "--seed", "1"],
            ["residual", "-c", "{catalog}"],
            ["validate"],
        ],
    )
    def test_exit_two(self, cli_runner, small_catalog_file, params_file, args):
        paths = {"catalog": str(small_catalog_file), "params": str(params_file)}
        result = cli_runner.invoke(cli, [arg.format(**paths) for arg in args])
        assert result.exit_code == 2, result.output

    def test_unknown_fix_parameter(self, cli_runner, small_catalog_file):
        result = cli_runner.invoke(cli, ["fit", "-c", str(small_catalog_file), "--fix", "q=1"])
        assert result.exit_code == 2
        assert "unknown parameter" in result.output

    def test_mutually_exclusive(self, cli_runner, small_catalog_file, params_file):
        both = cli_runner.invoke(
            cli, ["changepoint", "-c", str(small_catalog_file), "--t0", "4", "--search"]
        )
        assert both.exit_code == 2
        model = cli_runner.invoke(
            cli,
            ["residual", "-c", str(small_catalog_file), "--reference", str(params_file), "--model", str(params_file)],
        )
        assert model.exit_code == 2

    def test_bad_config_file(self, cli_runner, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text("colour=blue\n", encoding="utf-8")
        result = cli_runner.invoke(cli, ["--config", str(path), "fit"])
        assert result.exit_code == 2
        assert "--config" in result.output


# ============================================================================
# Fit Command Tests
# ============================================================================


class TestFitCommand:
    """Test the fit command."""

    def test_outputs(self, cli_runner, catalog_file, isolated_settings, json_reader):
        result = cli_runner.invoke(cli, ["fit", "-c", str(catalog_file), "--run-name", "test", "--b-value", "1.0"])
        assert result.exit_code == 0, result.output

        out = run_dir(isolated_settings, "fit")
        report = json_reader(out / "fit.json")
        manifest = json_reader(out / "manifest.json")

        assert report["aic"] == pytest.approx(-2 * report["loglik"] + 10)
        assert report["catalog"]["events"] == report["n_events"]
        assert report["branching_ratio"] > 0
        assert manifest["command"] == "fit"
        assert manifest["outputs"] == ["cumulative.csv", "cumulative.svg", "fit.json"]
        assert (out / "cumulative.svg").read_text(encoding="utf-8").startswith("<svg")

    def test_window_history_defaults_to_window_start(self, cli_runner, catalog_file, isolated_settings, json_reader):
        """A narrowed window keeps earlier events only with --history-start."""
        from nsetas.core.loader import read_catalog

        narrowed = ["-q", "fit", "-c", str(catalog_file), "--window", "100,300", "--run-name"]
        assert cli_runner.invoke(cli, narrowed + ["bare"]).exit_code == 0
        assert cli_runner.invoke(cli, narrowed + ["hist", "--history-start", "50"]).exit_code == 0

        bare = json_reader(isolated_settings / "fit-bare" / "fit.json")
        hist = json_reader(isolated_settings / "fit-hist" / "fit.json")
        expected = read_catalog(catalog_file, window=(100.0, 300.0), history_start=50.0).n_history

        assert bare["catalog"]["history_events"] == 0
        assert hist["catalog"]["history_events"] == expected > 0
        assert bare["catalog"]["events"] == hist["catalog"]["events"]

    def test_rerun_is_identical(self, cli_runner, catalog_file, isolated_settings, tmp_path):
        args = ["fit", "-c", str(catalog_file), "--run-name"]
        assert cli_runner.invoke(cli, args + ["one"]).exit_code == 0
        assert cli_runner.invoke(cli, args + ["two"]).exit_code == 0
        for name in ("fit.json", "cumulative.csv", "cumulative.svg", "manifest.json"):
            first = (isolated_settings / "fit-one" / name).read_bytes()
            second = (isolated_settings / "fit-two" / name).read_bytes()
            assert first == second, name

    def test_fixed_p(self, cli_runner, catalog_file, isolated_settings, json_reader):
        result = cli_runner.invoke(
            cli, ["-q", "fit", "-c", str(catalog_file), "--fix", "p=1.0", "--run-name", "test"]
        )
        assert result.exit_code == 0, result.output
        report = json_reader(run_dir(isolated_settings, "fit") / "fit.json")
        assert report["params"]["p"] == 1.0
        assert report["fixed"] == ["p"]
        assert "p" not in report["se"]

    def test_output_dir_option(self, cli_runner, small_catalog_file, tmp_path):
        target = tmp_path / "elsewhere"
        result = cli_runner.invoke(
            cli, ["fit", "-c", str(small_catalog_file), "-o", str(target), "--run-name", "x"]
        )
        assert result.exit_code == 0, result.output
        assert (target / "fit-x" / "fit.json").exists()


# ============================================================================
# Changepoint Command Tests
# ============================================================================


class TestChangepointCommand:
    """Test the changepoint command."""

    def test_predetermined(self, cli_runner, small_catalog_file, params_file, isolated_settings, json_reader):
        result = cli_runner.invoke(
            cli,
            ["changepoint", "-c", str(small_catalog_file), "--t0", "4", "--reference", str(params_file), "--run-name", "test"],
        )
        assert result.exit_code == 0, result.output

        out = run_dir(isolated_settings, "changepoint")
        report = json_reader(out / "changepoint.json")
        assert report["t0"] == 4.0
        assert report["aic12"] == pytest.approx(report["aic1"] + report["aic2"])
        assert report["delta_aic"] == pytest.approx(report["aic12"] - report["aic0"])
        assert report["fits"]["before"]["fixed"] == ["c", "alpha", "p"]
        header = (out / "curves.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "t,observed,whole,before_extended,after"

    def test_search(self, cli_runner, small_catalog_file, params_file, isolated_settings, json_reader):
        result = cli_runner.invoke(
            cli,
            [
                "changepoint", "-c", str(small_catalog_file), "--search", "--candidates", "3,4,6",
                "--q-penalty", "1", "--reference", str(params_file), "--run-name", "test",
            ],
        )
        assert result.exit_code == 0, result.output
        report = json_reader(run_dir(isolated_settings, "changepoint") / "changepoint.json")
        assert report["t0"] in (3.0, 4.0, 6.0)
        assert report["candidates_evaluated"] == 3
        assert report["q"] == 1.0

    def test_empty_period_exits_one(self, cli_runner, small_catalog_file, params_file):
        result = cli_runner.invoke(
            cli, ["changepoint", "-c", str(small_catalog_file), "--t0", "10.6", "--reference", str(params_file)]
        )
        assert result.exit_code == 1

    def test_run_config(self, cli_runner, run_config_file, tmp_path, json_reader):
        """Catalog, reference, t0 and output root come from the --config file."""
        result = cli_runner.invoke(cli, ["--config", str(run_config_file), "changepoint", "--run-name", "cfg"])
        assert result.exit_code == 0, result.output
        report = json_reader(tmp_path / "cfg-runs" / "changepoint-cfg" / "changepoint.json")
        assert report["t0"] == 150.0
        assert report["fits"]["whole"]["fixed"] == ["c", "alpha", "p"]


# ============================================================================
# Nsfit and Residual Command Tests
# ============================================================================


class TestNsfitCommand:
    """Test the nsfit command on a small catalog."""

    def test_single_model(self, cli_runner, small_catalog_file, params_file, isolated_settings, json_reader):
        result = cli_runner.invoke(
            cli,
            ["nsfit", "-c", str(small_catalog_file), "--reference", str(params_file), "-m", "1a", "--run-name", "test"],
        )
        assert result.exit_code == 0, result.output

        out = run_dir(isolated_settings, "nsfit")
        board = json_reader(out / "scoreboard.json")
        report = json_reader(out / "1a.json")

        assert board["winner"] == "1a"
        assert report["delta_abic"] <= 0
        assert report["map_ref"] == "1a.model.json"
        assert report["hyperparameter_count"] == 2
        for name in ("1a.model.json", "1a.trace.csv", "1a.svg", "scoreboard.md", "manifest.json"):
            assert (out / name).exists(), name

        checked = cli_runner.invoke(cli, ["validate", str(out)])
        assert checked.exit_code == 0, checked.output

    def test_primed_model_file_names(self, cli_runner, small_catalog_file, params_file, isolated_settings, json_reader):
        result = cli_runner.invoke(
            cli,
            [
                "nsfit", "-c", str(small_catalog_file), "--reference", str(params_file),
                "-m", "2a'", "--changepoint", "4", "--count-all-weights", "--run-name", "test",
            ],
        )
        assert result.exit_code == 0, result.output
        report = json_reader(run_dir(isolated_settings, "nsfit") / "2a-cp.json")
        assert report["label"] == "2a′"
        assert report["changepoint"] == 4.0
        assert report["hyperparameter_count"] == 4

    def test_select_labels(self):
        from nsetas.cli.nsfit import select_labels

        labels, notes = select_labels("all", has_changepoint=False)
        assert labels == ["1a", "1b", "2a", "2b", "3a", "3b"]
        assert notes
        assert len(select_labels("all", has_changepoint=True)[0]) == 12
        assert select_labels("3b', 1a, 3b′", has_changepoint=True) == (["3b′", "1a"], [])


class TestResidualCommand:
    """Test the residual command."""

    def test_stationary(self, cli_runner, catalog_file, params_file, isolated_settings, json_reader):
        result = cli_runner.invoke(
            cli, ["residual", "-c", str(catalog_file), "--reference", str(params_file), "--run-name", "test"]
        )
        assert result.exit_code == 0, result.output

        out = run_dir(isolated_settings, "residual")
        report = json_reader(out / "residual.json")
        assert report["model"] == "stationary"
        assert report["count_ratio"] == pytest.approx(report["n_events"] / report["expected_total"])
        assert report["ks_pvalue"] > 0.001
        assert (out / "residual.csv").read_text(encoding="utf-8").startswith("t_i,tau_i,i\n")

    def test_from_nsfit_report(self, cli_runner, small_catalog_file, params_file, isolated_settings, json_reader):
        fitted = cli_runner.invoke(
            cli,
            ["nsfit", "-c", str(small_catalog_file), "--reference", str(params_file), "-m", "3a", "--run-name", "test"],
        )
        assert fitted.exit_code == 0, fitted.output
        result = cli_runner.invoke(
            cli,
            [
                "residual", "-c", str(small_catalog_file),
                "--model", str(run_dir(isolated_settings, "nsfit") / "3a.json"), "--run-name", "test",
            ],
        )
        assert result.exit_code == 0, result.output
        report = json_reader(run_dir(isolated_settings, "residual") / "residual.json")
        assert report["model"] == "3a"
        assert report["n_events"] == 8

    def test_knot_mismatch_exits_one(self, cli_runner, small_catalog_file, params_file, isolated_settings):
        cli_runner.invoke(
            cli,
            ["nsfit", "-c", str(small_catalog_file), "--reference", str(params_file), "-m", "1a", "--run-name", "test"],
        )
        result = cli_runner.invoke(
            cli,
            [
                "residual", "-c", str(small_catalog_file), "--window", "1,9",
                "--model", str(run_dir(isolated_settings, "nsfit") / "1a.model.json"),
            ],
        )
        assert result.exit_code == 1


# ============================================================================
# Simulate, Init and Validate Command Tests
# ============================================================================


class TestSimulateCommand:
    """Test the simulate command."""

    def test_stationary(self, cli_runner, params_file, isolated_settings, json_reader):
        args = ["simulate", "--params", str(params_file), "--window", "0,100", "--seed", "3", "--run-name"]
        assert cli_runner.invoke(cli, args + ["one"]).exit_code == 0
        assert cli_runner.invoke(cli, args + ["two"]).exit_code == 0

        one = isolated_settings / "simulate-one"
        two = isolated_settings / "simulate-two"
        assert (one / "catalog.csv").read_bytes() == (two / "catalog.csv").read_bytes()
        report = json_reader(one / "sim_config.json")
        assert report["config"]["seed"] == 3
        assert report["truncated"] is False

    def test_catalog_is_readable(self, cli_runner, params_file, isolated_settings):
        from nsetas.core.loader import read_catalog

        result = cli_runner.invoke(
            cli,
            ["simulate", "--params", str(params_file), "--window", "0,50", "--seed", "1",
             "--origin-epoch", "2020-01-01", "--run-name", "test"],
        )
        assert result.exit_code == 0, result.output
        catalog = read_catalog(run_dir(isolated_settings, "simulate") / "catalog.csv")
        assert catalog.window == (0.0, 50.0)
        assert catalog.origin_epoch == "2020-01-01"

    def test_seed_from_config(self, cli_runner, run_config_file, tmp_path):
        result = cli_runner.invoke(
            cli, ["--config", str(run_config_file), "simulate", "--window", "0,20", "--run-name", "cfg"]
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "cfg-runs" / "simulate-cfg" / "catalog.csv").exists()

    def test_recover_needs_model(self, cli_runner, params_file):
        result = cli_runner.invoke(
            cli, ["simulate", "--params", str(params_file), "--window", "0,10", "--seed", "1", "--recover"]
        )
        assert result.exit_code == 2


class TestInitCommand:
    """Test the init command."""

    def test_creates_project(self, cli_runner, tmp_path):
        project = tmp_path / "demo"
        result = cli_runner.invoke(cli, ["init", str(project)])
        assert result.exit_code == 0, result.output
        for name in (".env", "run.env", "reference.json", "catalog.csv"):
            assert (project / name).exists(), name

    def test_skips_existing_files(self, cli_runner, tmp_path):
        project = tmp_path / "demo"
        project.mkdir()
        (project / "run.env").write_text("seed=1\n", encoding="utf-8")

        result = cli_runner.invoke(cli, ["init", str(project)])
        assert result.exit_code == 0
        assert "Skipping existing file: run.env" in result.output
        assert (project / "run.env").read_text(encoding="utf-8") == "seed=1\n"

        forced = cli_runner.invoke(cli, ["init", str(project), "--force"])
        assert forced.exit_code == 0
        assert "catalog=catalog.csv" in (project / "run.env").read_text(encoding="utf-8")

    def test_demo_catalog_is_deterministic(self, cli_runner, tmp_path):
        cli_runner.invoke(cli, ["init", str(tmp_path / "a")])
        cli_runner.invoke(cli, ["init", str(tmp_path / "b")])
        assert (tmp_path / "a" / "catalog.csv").read_bytes() == (tmp_path / "b" / "catalog.csv").read_bytes()


class TestValidateCommand:
    """Test the validate command."""

    def test_list(self, cli_runner):
        result = cli_runner.invoke(cli, ["validate", "--list"])
        assert result.exit_code == 0
        assert "bayes_fit" in result.output

    def test_invalid_file(self, cli_runner, tmp_path):
        path = tmp_path / "fit.json"
        path.write_text(json.dumps({"params": {}}), encoding="utf-8")
        result = cli_runner.invoke(cli, ["validate", str(path)])
        assert result.exit_code == 1

    def test_explicit_schema(self, cli_runner, tmp_path):
        path = tmp_path / "anything.json"
        path.write_text(json.dumps({"command": "fit"}), encoding="utf-8")
        result = cli_runner.invoke(cli, ["validate", str(path), "--schema", "manifest"])
        assert result.exit_code == 1

    def test_unknown_schema(self, cli_runner, tmp_path):
        path = tmp_path / "x.json"
        path.write_text("{}", encoding="utf-8")
        result = cli_runner.invoke(cli, ["validate", str(path), "--schema", "timeline"])
        assert result.exit_code == 2

    def test_skips_unknown_files(self, cli_runner, tmp_path):
        path = tmp_path / "notes.json"
        path.write_text("{}", encoding="utf-8")
        result = cli_runner.invoke(cli, ["validate", str(path)])
        assert result.exit_code == 0
        assert "Skipping notes.json" in result.output
