import json

import pytest
from typer.testing import CliRunner

from config.app import app
from core.exceptions import NotPeriodicSupportException
from services.experiments import ExperimentResult

runner = CliRunner()


def read_json(path):
    return json.loads(path.read_text())


def test_help_lists_commands():
    result = runner.invoke(app, ["--help"])
    assert result.exit_code == 0
    for command in ("run", "compile", "period"):
        assert command in result.output


@pytest.mark.parametrize("r", [2, 4])
def test_run_full_qft(tmp_path, r):
    result = runner.invoke(app, ["run", "--r", str(r), "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = read_json(tmp_path / "experiment1_summary.json")
    assert summary["r_inferred"] == r
    assert summary["passed"] is True


def test_run_observer(tmp_path):
    result = runner.invoke(
        app, ["run", "-e", "observer_spectral", "--r", "2", "--x0", "1", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    summary = read_json(tmp_path / "experiment2_summary.json")
    assert summary["states"] == ["000", "100"]
    assert (tmp_path / "experiment2_spectrum.csv").exists()


def test_run_observer_with_shots(tmp_path):
    result = runner.invoke(
        app,
        ["run", "-e", "observer_spectral", "--r", "4", "--shots", "200", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    counts = read_json(tmp_path / "experiment2_summary.json")["shot_counts"]
    assert set(counts) <= {"000", "010", "100", "110"}
    assert sum(counts.values()) == 200


@pytest.mark.parametrize("n,r", [(5, 3), (7, 10)])
def test_period_not_dividing_register(tmp_path, n, r):
    result = runner.invoke(app, ["period", "--n", str(n), "--r", str(r), "--seed", "1", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    estimate = read_json(tmp_path / "period_finding_summary.json")["estimate"]
    assert estimate["r_hat"] == r
    assert estimate["verified"] is True


def test_same_seed_same_files(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        result = runner.invoke(app, ["period", "--n", "4", "--r", "4", "--seed", "9", "--out", str(out)])
        assert result.exit_code == 0, result.output
    name = "period_finding_summary.json"
    assert (first / name).read_bytes() == (second / name).read_bytes()


def test_period_from_table(tmp_path):
    table = tmp_path / "f.csv"
    table.write_text("".join(f"{x},{(x + 1) % 4}\n" for x in range(16)))
    result = runner.invoke(app, ["period", "--table", str(table), "--repetitions", "24", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = read_json(tmp_path / "period_finding_summary.json")
    assert summary["estimate"]["r_hat"] == 4


def test_compile_qft(tmp_path):
    result = runner.invoke(app, ["compile", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = read_json(tmp_path / "compile_summary.json")
    assert summary["ops"] == 11
    assert summary["equivalence"]["pass"] is True
    assert (tmp_path / "program.txt").read_text().strip() == summary["program"]


def test_compile_reference(tmp_path):
    result = runner.invoke(app, ["compile", "--reference", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert read_json(tmp_path / "compile_summary.json")["source"] == "reference"


def test_compile_circuit_file(tmp_path):
    circuit = tmp_path / "bell.txt"
    circuit.write_text("QUBITS 2\nH 1\nCR 1 2 d=1\n")
    result = runner.invoke(app, ["compile", "--circuit", str(circuit), "--keep-swaps", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert read_json(tmp_path / "compile_summary.json")["passed"] is True


def test_invalid_configuration_exits_with_two(tmp_path):
    result = runner.invoke(app, ["run", "--n", "4", "--out", str(tmp_path)])
    assert result.exit_code == 2
    record = read_json(tmp_path / "run_failure.json")
    assert record["error"]["type"] == "InvalidConfigurationException"
    assert record["passed"] is False


def test_circuit_syntax_error(tmp_path):
    circuit = tmp_path / "bad.txt"
    circuit.write_text("FOO 1\n")
    result = runner.invoke(app, ["compile", "--circuit", str(circuit), "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert read_json(tmp_path / "compile_failure.json")["error"]["type"] == "CircuitSyntaxException"


def test_missing_molecule(tmp_path, monkeypatch):
    monkeypatch.setenv("MOLECULE_PATH", str(tmp_path / "absent.json"))
    result = runner.invoke(app, ["run", "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert read_json(tmp_path / "run_failure.json")["error"]["type"] == "MoleculeSpecException"


def test_failed_checks_exit_with_one(mocker):
    run = mocker.patch(
        "views.period.run_period_finding_cli",
        return_value=ExperimentResult(summary={"passed": False}, passed=False),
    )
    result = runner.invoke(app, ["period", "--r", "2"])
    assert result.exit_code == 1
    run.assert_called_once()
    assert run.call_args.args[0].r == 2


def test_service_error_writes_failure_record(tmp_path, mocker):
    mocker.patch(
        "views.period.run_period_finding_cli",
        side_effect=NotPeriodicSupportException("support is not periodic", support="0,3"),
    )
    result = runner.invoke(app, ["period", "--out", str(tmp_path)])
    assert result.exit_code == 2
    record = read_json(tmp_path / "period_failure.json")
    assert record["error"]["type"] == "NotPeriodicSupportException"
    assert record["error"]["context"] == {"support": "0,3"}
