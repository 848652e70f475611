import math

import numpy as np
import pytest

from core.exceptions import (
    AmbiguousAssignmentException,
    InvalidSpinException,
    NotPeriodicSupportException,
    SingularInversionException,
    UndefinedCorrelationException,
)
from services import readout
from services.pulse_compiler import PulseOp
from services.qstate import DensityKind, DensityMatrix, StateVector, spin_operator
from services.readout import (
    assignment_collisions,
    attenuated_correlation,
    decode_observer_readout,
    infer_period_from_states,
    line_frequency,
    lorentzian_trace,
    readout_set,
    reduced_populations,
    synthesize_spectrum,
    tomograph,
)
from services.spin_simulator import (
    labeled_pseudo_pure_target,
    pseudo_pure_target,
    thermal_state,
)
from tests.conftest import random_density


class TestSpectrum:
    def test_thermal_lines_are_positive_and_equal(self, molecule):
        spectrum = synthesize_spectrum(thermal_state(molecule), 0, molecule)
        assert len(spectrum.lines) == 4
        assert [line.amplitude for line in spectrum.lines] == pytest.approx([1.0] * 4)
        assert spectrum.label == "C'"

    def test_line_positions(self, molecule):
        spectrum = synthesize_spectrum(thermal_state(molecule), "Ca", molecule)
        assert spectrum.observed == 1
        expected = sorted(
            line_frequency(0.0, (34.94, 53.81), bits) for bits in [(0, 0), (0, 1), (1, 0), (1, 1)]
        )
        assert [line.frequency for line in spectrum.lines] == pytest.approx(expected)
        # neighbours in |0> shift the line up by J/2
        assert line_frequency(0.0, (34.94, 53.81), (0, 0)) == pytest.approx((34.94 + 53.81) / 2)

    def test_pseudo_pure_state_shows_one_line(self, molecule):
        spectrum = synthesize_spectrum(pseudo_pure_target(3), 0, molecule)
        present = spectrum.present_lines()
        assert len(present) == 1
        assert present[0].assignment == "00"
        assert present[0].amplitude == pytest.approx(1.0)

    def test_spin_in_one_gives_negative_line(self, molecule):
        rho = DensityMatrix(-spin_operator(3, 2, "z").matrix, DensityKind.DEVIATION)
        spectrum = synthesize_spectrum(rho, 2, molecule)
        assert all(line.amplitude == pytest.approx(-1.0) for line in spectrum.lines)

    def test_custom_readout(self, molecule):
        # no rotation leaves longitudinal magnetization invisible
        spectrum = synthesize_spectrum(thermal_state(molecule), 0, molecule, PulseOp.z(0, math.pi))
        assert spectrum.present_lines() == []

    def test_rows(self, molecule):
        rows = synthesize_spectrum(thermal_state(molecule), 0, molecule).rows()
        assert set(rows[0]) == {"frequency_hz", "amplitude", "assignment"}

    def test_inactive_spin(self, molecule):
        with pytest.raises(InvalidSpinException):
            synthesize_spectrum(thermal_state(molecule), 3, molecule)

    def test_lorentzian_peak_height(self, molecule):
        spectrum = synthesize_spectrum(pseudo_pure_target(3), 0, molecule)
        line = spectrum.present_lines()[0]
        trace = lorentzian_trace(spectrum, [line.frequency], linewidth=0.5)
        assert trace[0] == pytest.approx(1.0, abs=1e-3)


class TestObserverDecoding:
    def test_labelled_state_decodes_to_ground_state(self, observer):
        spectrum = synthesize_spectrum(labeled_pseudo_pure_target(4), 0, observer)
        decoded = decode_observer_readout(spectrum, observer=0)
        assert [state for state, _ in decoded] == ["000"]
        assert decoded[0][1] == pytest.approx(1.0)

    def test_superposition_decodes_two_states(self, observer):
        # I_0z (|000><000| + |100><100|)
        populations = np.zeros(8)
        populations[[0, 4]] = 1.0
        matrix = np.kron(np.diag([0.5, -0.5]), np.diag(populations))
        spectrum = synthesize_spectrum(DensityMatrix(matrix, DensityKind.DEVIATION), 0, observer)
        decoded = decode_observer_readout(spectrum)
        assert sorted(state for state, _ in decoded) == ["000", "100"]

    def test_wrong_observer(self, observer):
        spectrum = synthesize_spectrum(labeled_pseudo_pure_target(4), 1, observer)
        with pytest.raises(InvalidSpinException):
            decode_observer_readout(spectrum, observer=0)

    def test_unresolved_lines(self, molecule):
        degenerate = molecule.with_coupling("Ca", "Cb", 34.94)
        spectrum = synthesize_spectrum(thermal_state(degenerate), "Ca", degenerate)
        assert assignment_collisions(spectrum)
        with pytest.raises(AmbiguousAssignmentException):
            decode_observer_readout(spectrum)


class TestTomography:
    def test_readout_set_size(self):
        assert len(readout_set(3)) == 27
        assert readout_set(1) == [("-",), ("x",), ("y",)]

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_reconstructs_random_deviation(self, rng, n):
        rho = random_density(rng, n, rank=3)
        result = tomograph(rho)
        assert result.rank == 4**n
        assert np.allclose(result.reconstructed.matrix, rho.deviation().matrix, atol=1e-10)
        assert result.residual < 1e-10

    def test_physical_state_loses_only_identity(self):
        rho = StateVector.basis(0, 3).to_density()
        result = tomograph(rho)
        assert np.allclose(result.reconstructed.matrix, pseudo_pure_target(3).matrix, atol=1e-10)
        summary = result.to_dict()
        assert summary["dimension"] == 8
        assert len(summary["readout_set"]) == 27

    def test_four_spins_refused(self, rng):
        with pytest.raises(SingularInversionException):
            tomograph(random_density(rng, 4))

    def test_molecule_size_checked(self, rng, observer):
        with pytest.raises(InvalidSpinException):
            tomograph(random_density(rng, 3), observer)

    def test_reconstructs_from_synthesized_spectra(self, rng, molecule, mocker):
        spy = mocker.spy(readout, "synthesize_spectrum")
        rho = random_density(rng, 3, rank=3)
        result = tomograph(rho, molecule)
        assert spy.call_count == 27 * 3
        assert np.allclose(result.reconstructed.matrix, rho.deviation().matrix, atol=1e-10)
        assert np.allclose(result.reconstructed.matrix, tomograph(rho).reconstructed.matrix, atol=1e-10)


class TestCorrelation:
    def test_identical_states(self, rng):
        rho = random_density(rng, 3)
        assert attenuated_correlation(rho, rho) == pytest.approx(1.0)

    def test_attenuation(self, rng):
        rho = random_density(rng, 2).deviation()
        weaker = rho.with_matrix(0.4 * rho.matrix)
        assert attenuated_correlation(rho, weaker) == pytest.approx(0.4)

    def test_orthogonal_deviations(self):
        a = DensityMatrix(spin_operator(2, 0, "z").matrix, DensityKind.DEVIATION)
        b = DensityMatrix(spin_operator(2, 1, "z").matrix, DensityKind.DEVIATION)
        assert attenuated_correlation(a, b) == pytest.approx(0.0)

    def test_zero_reference(self):
        with pytest.raises(UndefinedCorrelationException):
            attenuated_correlation(DensityMatrix(np.eye(4) / 4), DensityMatrix(np.eye(4) / 4))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(UndefinedCorrelationException):
            attenuated_correlation(random_density(rng, 1), random_density(rng, 2))


class TestPeriodInference:
    @pytest.mark.parametrize(
        "states,expected",
        [
            (["000", "100"], (4, 2)),
            ([0, 2, 4, 6], (2, 4)),
            (list(range(8)), (1, 8)),
            ([0], (8, 1)),
        ],
    )
    def test_progressions(self, states, expected):
        assert infer_period_from_states(states, 3) == expected

    @pytest.mark.parametrize("states", [[0, 3], [0, 4, 6], [], [9]])
    def test_not_periodic(self, states):
        with pytest.raises(NotPeriodicSupportException):
            infer_period_from_states(states, 3)


def test_reduced_populations():
    rho = StateVector.from_amplitudes([1, 0, 0, 0, 0, 0, 1, 0], normalize=True).to_density()
    assert reduced_populations(rho, [0]) == pytest.approx({"0": 0.5, "1": 0.5})
    assert reduced_populations(rho, [2]) == pytest.approx({"0": 1.0, "1": 0.0})
