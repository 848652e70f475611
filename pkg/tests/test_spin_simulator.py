import logging
import math

import numpy as np
import pytest

from core.exceptions import InvalidSpinException, SimulationException, SpinCountException
from services import pulse_compiler
from services.circuits import build_qft_circuit, logical_unitary
from services.pulse_compiler import PulseOp, PulseProgram, program_unitary
from services.qstate import (
    DensityKind,
    DensityMatrix,
    apply_unitary,
    product_operator,
    spin_operator,
)
from services.spin_simulator import (
    SpinSimulator,
    apply_gradient,
    fit_to_target,
    hamiltonian,
    labeled_pseudo_pure_program,
    labeled_pseudo_pure_target,
    prepare_labeled_pseudo_pure_4spin,
    prepare_pseudo_pure_3spin,
    pseudo_pure_program,
    pseudo_pure_target,
    run_preparation,
    run_program,
    step_polarizations,
    thermal_state,
)
from tests.conftest import random_circuit, random_density


class TestThermalState:
    def test_unit_weights(self, molecule):
        rho = thermal_state(molecule)
        assert rho.kind is DensityKind.DEVIATION
        assert step_polarizations(rho) == pytest.approx([1.0, 1.0, 1.0])

    def test_gyromagnetic_weights(self, observer):
        rho = thermal_state(observer, weighted=True)
        assert step_polarizations(rho) == pytest.approx([1.0, 1.0, 1.0, 3.976])


class TestHamiltonian:
    def test_diagonal_and_hermitian(self, molecule):
        h = hamiltonian(molecule)
        assert np.allclose(h, np.diag(np.diag(h)))
        assert np.allclose(h, h.conj().T)

    def test_coupling_term(self, molecule):
        h = hamiltonian(molecule.with_active(["C'", "Ca"]))
        shifts_only = 2 * math.pi * (-4320.0 * spin_operator(2, 0, "z").matrix)
        coupling = 2 * math.pi * 34.94 * product_operator(2, {0: "z", 1: "z"}).matrix
        assert np.allclose(h, shifts_only + coupling)


class TestGradient:
    def test_removes_transverse_magnetization(self, molecule):
        simulator = SpinSimulator(molecule)
        rho = simulator.apply_pulse(thermal_state(molecule), PulseOp.y(0, math.pi / 2))
        crushed = simulator.apply_pulse(rho, PulseOp.gradient())
        assert step_polarizations(crushed) == pytest.approx([0.0, 1.0, 1.0], abs=1e-12)

    def test_zero_quantum_survives_unless_diagonal_only(self):
        matrix = np.zeros((4, 4), dtype=complex)
        matrix[1, 2] = matrix[2, 1] = 0.5
        rho = DensityMatrix(matrix, DensityKind.DEVIATION)
        assert np.allclose(apply_gradient(rho).matrix, matrix)
        assert np.allclose(apply_gradient(rho, diagonal_only=True).matrix, 0.0)


class TestDelays:
    def test_pair_delay_is_coupling_rotation(self, molecule):
        j12 = molecule.active_couplings()[0, 1]
        simulator = SpinSimulator(molecule)
        propagator = simulator.delay_propagator(PulseOp.delay(1 / (2 * j12), (0, 1)))
        assert np.allclose(propagator, PulseOp.coupling(0, 1, math.pi).unitary(3))

    @pytest.mark.parametrize("strict", [False, True])
    def test_two_half_coupling_delays_make_one_full(self, molecule, strict):
        j12 = molecule.active_couplings()[0, 1]
        simulator = SpinSimulator(molecule, strict_delays=strict)
        half_delay = PulseOp.delay(1 / (2 * j12), (0, 1))
        full_delay = PulseOp.delay(1 / j12, (0, 1))
        half = simulator.delay_propagator(half_delay)
        assert np.allclose(half @ half, simulator.delay_propagator(full_delay))
        rho = DensityMatrix(spin_operator(3, 0, "x").matrix, DensityKind.DEVIATION)
        twice = simulator.apply_pulse(simulator.apply_pulse(rho, half_delay), half_delay)
        once = simulator.apply_pulse(rho, full_delay)
        assert np.allclose(twice.matrix, once.matrix)

    def test_strict_delay_is_diagonal(self, molecule):
        simulator = SpinSimulator(molecule, strict_delays=True)
        propagator = simulator.delay_propagator(PulseOp.delay(0.001))
        assert np.allclose(propagator, np.diag(np.diag(propagator)))
        assert np.allclose(propagator @ propagator.conj().T, np.eye(8))

    def test_delays_leave_populations_alone(self, molecule):
        rho = thermal_state(molecule)
        for strict in (False, True):
            evolved = SpinSimulator(molecule, strict_delays=strict).apply_pulse(rho, PulseOp.delay(0.013))
            assert np.allclose(evolved.matrix, rho.matrix)


class TestProgramExecution:
    def test_coherent_program_matches_unitary(self, molecule):
        program = pulse_compiler.simplify(pulse_compiler.compile(build_qft_circuit(3)))
        rho = DensityMatrix(spin_operator(3, 0, "x").matrix, DensityKind.DEVIATION)
        unitary = program_unitary(program)
        evolved = run_program(rho, program, molecule)
        assert np.allclose(evolved.matrix, unitary @ rho.matrix @ unitary.conj().T)

    def test_random_circuits_agree_with_direct_unitary(self, molecule):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            circuit = random_circuit(rng, 3)
            rho = random_density(rng, 3)
            evolved = run_program(rho, pulse_compiler.compile(circuit), molecule)
            expected = apply_unitary(rho, logical_unitary(circuit))
            assert np.allclose(evolved.matrix, expected.matrix, atol=1e-10), seed

    def test_relabeling_moves_polarization(self, molecule):
        rho = DensityMatrix(spin_operator(3, 0, "z").matrix, DensityKind.DEVIATION)
        program = PulseProgram(3, (), relabeling=(2, 1, 0))
        assert step_polarizations(run_program(rho, program, molecule)) == pytest.approx([0.0, 0.0, 1.0])

    def test_size_mismatch(self, molecule):
        with pytest.raises(SpinCountException):
            run_program(thermal_state(molecule), PulseProgram(2), molecule)

    def test_inactive_spin(self, molecule):
        with pytest.raises(InvalidSpinException):
            SpinSimulator(molecule).apply_pulse(thermal_state(molecule), PulseOp.x(3, math.pi))


class TestThreeSpinPreparation:
    def test_reaches_pseudo_pure_state(self, molecule):
        result = run_preparation(pseudo_pure_program(molecule), molecule)
        assert result.scale == pytest.approx(1.0)
        assert result.residual < 1e-9
        assert len(result.snapshots) == 4

    def test_target(self):
        target = pseudo_pure_target(3)
        assert target.matrix[0, 0] == pytest.approx(7 / 8)
        assert target.matrix[5, 5] == pytest.approx(-1 / 8)
        target.validate()

    def test_first_step_polarizations(self, molecule):
        result = run_preparation(pseudo_pure_program(molecule), molecule)
        assert step_polarizations(result.snapshots[0]) == pytest.approx([1.0, 0.5, 0.25])

    def test_rounded_tip_angle_leaves_residual(self, molecule, caplog):
        with caplog.at_level(logging.WARNING, logger="services.spin_simulator"):
            result = run_preparation(pseudo_pure_program(molecule, literal_angles=True), molecule)
        assert result.residual > 1e-6
        assert result.residual < 0.1
        assert "residual" in caplog.text

    def test_full_hamiltonian_delays_spoil_preparation(self, molecule):
        # chemical shifts are not refocused during the delays
        result = run_preparation(pseudo_pure_program(molecule), molecule, strict_delays=True)
        assert result.residual > 1e-6

    def test_helper_returns_state(self, molecule):
        rho = prepare_pseudo_pure_3spin(molecule)
        scale, residual = fit_to_target(rho, pseudo_pure_target(3))
        assert residual < 1e-9

    def test_flattened_program(self, molecule):
        preparation = pseudo_pure_program(molecule)
        assert len(preparation.flattened()) == sum(len(step) for step in preparation.steps)

    def test_needs_three_spins(self, observer):
        with pytest.raises(SpinCountException):
            pseudo_pure_program(observer)

    def test_needs_couplings(self, molecule):
        with pytest.raises(SimulationException):
            pseudo_pure_program(molecule.with_coupling("C'", "Ca", 0.0))


class TestLabelledPreparation:
    def test_reaches_labelled_target(self, observer):
        result = run_preparation(labeled_pseudo_pure_program(observer), observer)
        assert result.scale == pytest.approx(1.0)
        assert result.residual < 1e-9

    def test_target_is_traceless(self):
        labeled_pseudo_pure_target(4).validate()

    def test_helper(self, observer):
        rho = prepare_labeled_pseudo_pure_4spin(observer)
        _, residual = fit_to_target(rho, labeled_pseudo_pure_target(4))
        assert residual < 1e-9

    def test_uses_observer_labels(self, observer):
        assert all(step.first_label == 0 for step in labeled_pseudo_pure_program(observer).steps)

    def test_observer_must_couple(self, observer):
        with pytest.raises(SimulationException):
            labeled_pseudo_pure_program(observer.with_coupling("Ca", "H", 0.0))
