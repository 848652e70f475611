import json

import numpy as np
import pytest

from core.exceptions import InvalidConfigurationException, MoleculeSpecException
from services import experiments
from services.experiments import (
    ExperimentKind,
    RunConfig,
    apply_semiclassical_qft,
    periodic_state_program,
    qft_program,
    run_experiment_1,
    run_experiment_2,
    run_period_finding_cli,
)
from services.circuits import semiclassical_qft_density
from services.period_finding import prepare_periodic_state
from services.pulse_compiler import program_unitary
from services.qstate import DensityKind, DensityMatrix, StateVector
from services.spin_simulator import SpinSimulator


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig.build()
        assert cfg.experiment is ExperimentKind.FULL_QFT_TOMOGRAPHY
        assert (cfg.n_qubits, cfg.r, cfg.x0) == (3, 2, 0)

    @pytest.mark.parametrize(
        "values",
        [
            {"n_qubits": 4},
            {"r": 3},
            {"r": 2, "x0": 2},
            {"r": 0},
            {"seed": -1},
            {"experiment": ExperimentKind.PERIOD_FINDING, "repetitions": 0},
        ],
    )
    def test_invalid(self, values):
        with pytest.raises(InvalidConfigurationException):
            RunConfig.build(**values)

    def test_period_finding_allows_other_sizes(self):
        cfg = RunConfig.build(experiment=ExperimentKind.PERIOD_FINDING, n_qubits=5, r=3)
        assert cfg.r == 3

    def test_none_values_fall_back_to_defaults(self):
        assert RunConfig.build(repetitions=None, output_dir=None).repetitions is None

    def test_public_dict_has_no_paths(self, tmp_path):
        record = RunConfig.build(output_dir=tmp_path).public_dict()
        assert "output_dir" not in record
        assert "molecule_path" not in record
        assert record["experiment"] == "full_qft_tomography"


class TestPreparationPulses:
    @pytest.mark.parametrize("r,x0", [(1, 0), (2, 1), (4, 3), (8, 5)])
    def test_prepares_periodic_state(self, r, x0):
        program = periodic_state_program(3, range(3), r, x0)
        prepared = program_unitary(program) @ StateVector.basis(0, 3).amplitudes
        overlap = np.vdot(prepare_periodic_state(3, r, x0).amplitudes, prepared)
        assert abs(overlap) == pytest.approx(1.0)

    def test_period_must_divide(self):
        with pytest.raises(InvalidConfigurationException):
            periodic_state_program(3, range(3), 3)

    def test_qft_programs(self):
        assert len(qft_program()) == 11
        assert qft_program(use_reference=True).name == "reference-qft"


def test_semiclassical_pulses_match_ensemble_form(observer):
    # observer at position 0 stays untouched; computational spins 1..3
    state = prepare_periodic_state(3, 4, 1)
    block = np.outer(state.amplitudes, state.amplitudes.conj())
    rho = DensityMatrix(np.kron(np.diag([0.5, -0.5]), block), DensityKind.DEVIATION)
    result = apply_semiclassical_qft(SpinSimulator(observer), rho, [1, 2, 3])
    expected = semiclassical_qft_density(DensityMatrix(block))
    assert np.allclose(result.matrix, np.kron(np.diag([0.5, -0.5]), expected.matrix))


class TestExperimentOne:
    @pytest.mark.parametrize("r", [1, 2, 4, 8])
    def test_recovers_period(self, r):
        result = run_experiment_1(RunConfig.build(r=r))
        assert result.passed
        assert result.summary["r_inferred"] == r
        assert result.summary["k"] == 8 // r
        assert result.summary["correlation"] == pytest.approx(1.0)
        assert result.summary["qft_ops"] == 11

    def test_support_for_offset(self):
        result = run_experiment_1(RunConfig.build(r=4, x0=3))
        assert result.summary["support"] == ["000", "010", "100", "110"]

    def test_reference_program(self):
        assert run_experiment_1(RunConfig.build(r=2, use_reference_program=True)).passed

    def test_writes_outputs(self, tmp_path):
        result = run_experiment_1(RunConfig.build(r=2, output_dir=tmp_path))
        assert set(result.files) == {"summary", "spectrum", "tomogram"}
        summary = json.loads((tmp_path / "experiment1_summary.json").read_text())
        assert summary["support"] == ["000", "100"]
        header = (tmp_path / "experiment1_spectrum.csv").read_text().splitlines()[0]
        assert header == "spin,frequency_hz,amplitude,assignment"


class TestExperimentTwo:
    @pytest.mark.parametrize("r", [1, 2, 4, 8])
    def test_recovers_period(self, r):
        result = run_experiment_2(RunConfig.build(experiment=ExperimentKind.OBSERVER_SPECTRAL, r=r))
        assert result.passed
        assert result.summary["r_inferred"] == r
        assert len(result.summary["states"]) == r

    def test_r_two_decodes_000_and_100(self):
        result = run_experiment_2(RunConfig.build(experiment=ExperimentKind.OBSERVER_SPECTRAL, r=2, x0=1))
        assert result.summary["states"] == ["000", "100"]
        assert [d["amplitude"] for d in result.summary["decoded"]] == pytest.approx([0.5, 0.5])

    def test_baseline(self):
        result = run_experiment_2(RunConfig.build(experiment=ExperimentKind.OBSERVER_SPECTRAL, baseline=True))
        assert result.passed
        assert result.summary["states"] == ["000"]

    def test_shots_land_on_the_spectral_support(self):
        cfg = RunConfig.build(experiment=ExperimentKind.OBSERVER_SPECTRAL, r=2, x0=1, shots=400, seed=3)
        result = run_experiment_2(cfg)
        counts = result.summary["shot_counts"]
        assert set(counts) == {"000", "100"}
        assert sum(counts.values()) == 400
        assert result.passed

    def test_baseline_shots(self):
        cfg = RunConfig.build(experiment=ExperimentKind.OBSERVER_SPECTRAL, baseline=True, shots=50)
        assert run_experiment_2(cfg).summary["shot_counts"] == {"000": 50}

    def test_no_shots_by_default(self):
        cfg = RunConfig.build(experiment=ExperimentKind.OBSERVER_SPECTRAL, r=4)
        assert run_experiment_2(cfg).summary["shot_counts"] == {}


class TestPeriodFindingRun:
    def test_generated_function(self, tmp_path):
        cfg = RunConfig.build(
            experiment=ExperimentKind.PERIOD_FINDING, n_qubits=4, r=4, x0=1, repetitions=24, output_dir=tmp_path
        )
        result = run_period_finding_cli(cfg)
        assert result.passed
        assert result.summary["estimate"]["r_hat"] == 4
        assert (tmp_path / "period_finding_summary.json").exists()

    def test_function_table(self, tmp_path):
        table = tmp_path / "f.csv"
        table.write_text("x,f\n" + "".join(f"{x},{x % 2}\n" for x in range(8)))
        cfg = RunConfig.build(experiment=ExperimentKind.PERIOD_FINDING, function_table=table, repetitions=24)
        result = run_period_finding_cli(cfg)
        assert result.summary["n"] == 3
        assert result.summary["classical_period"] == 2
        assert result.passed

    def test_default_repetitions(self):
        cfg = RunConfig.build(experiment=ExperimentKind.PERIOD_FINDING, n_qubits=3, r=1)
        assert run_period_finding_cli(cfg).summary["estimate"]["samples_used"] == 12

    @pytest.mark.parametrize("n,r", [(5, 3), (6, 3), (6, 5), (7, 10), (6, 12)])
    def test_periods_that_do_not_divide_n(self, n, r):
        for seed in range(10):
            cfg = RunConfig.build(experiment=ExperimentKind.PERIOD_FINDING, n_qubits=n, r=r, seed=seed)
            result = run_period_finding_cli(cfg)
            assert result.passed, seed
            assert result.summary["estimate"]["r_hat"] == r
            assert result.summary["estimate"]["verified"] is True


def test_run_dispatches_and_reraises(tmp_path):
    with pytest.raises(MoleculeSpecException):
        experiments.run(RunConfig.build(molecule_path=tmp_path / "missing.json"))
