"""
Readout Analysis Service
First-order spectrum synthesis, observer-spin decoding, linear-inversion
tomography, attenuated correlation and period inference from a state support.

Spectral convention: a neighbour in |0> contributes m = +1/2, so a line sits
at nu_i + sum_k J_ik m_k. Amplitudes are phased against the coherence an
I_z polarisation produces under the default [pi/2]_y readout, making a spin
in |0> give a positive line.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import settings
from core.exceptions import (
    AmbiguousAssignmentException,
    InvalidSpinException,
    NotPeriodicSupportException,
    SingularInversionException,
    UndefinedCorrelationException,
)
from services.molecule import MoleculeSpec
from services.pulse_compiler import PulseOp
from services.qstate import DensityKind, DensityMatrix, partial_trace
from services.spin_simulator import SpinSimulator
from services.utils import bitstring

logger = logging.getLogger(__name__)

# Coherence rho[0, 1] left by the default readout acting on I_z
REFERENCE_COHERENCE = -0.5

LINE_THRESHOLD = 1e-9


@dataclass(frozen=True)
class SpectralLine:
    frequency: float
    amplitude: float
    assignment: str
    coherence: complex = 0j


@dataclass
class Spectrum:
    observed: int
    label: str
    center_hz: float
    # coupling of the observed spin to every other active spin, in position order
    couplings_hz: Tuple[float, ...]
    lines: List[SpectralLine] = field(default_factory=list)

    def present_lines(self, threshold: float = LINE_THRESHOLD) -> List[SpectralLine]:
        return [line for line in self.lines if abs(line.amplitude) > threshold]

    def rows(self) -> List[Dict[str, object]]:
        return [
            {"frequency_hz": line.frequency, "amplitude": line.amplitude, "assignment": line.assignment}
            for line in self.lines
        ]


def line_frequency(center_hz: float, couplings_hz: Sequence[float], neighbour_bits: Sequence[int]) -> float:
    return center_hz + sum(j * (0.5 - bit) for j, bit in zip(couplings_hz, neighbour_bits))


def _neighbour_pairs(n: int, observed: int) -> List[Tuple[Tuple[int, ...], int, int]]:
    """(neighbour bits, row index with observed=0, column index with observed=1)."""
    pairs = []
    for neighbours in product((0, 1), repeat=n - 1):
        bits = list(neighbours)
        bits.insert(observed, 0)
        row = int("".join(map(str, bits)), 2)
        pairs.append((tuple(neighbours), row, row | (1 << (n - 1 - observed))))
    return pairs


def synthesize_spectrum(
    rho: DensityMatrix,
    observe: Union[int, str],
    molecule: MoleculeSpec,
    readout_pulse: Optional[Union[PulseOp, Sequence[PulseOp]]] = None,
) -> Spectrum:
    """
    Apply the readout (default [pi/2]_y on the observed spin) and turn every
    single-quantum coherence of the observed spin into one line.
    """
    n = molecule.n_active
    observed = molecule.position_of(observe) if isinstance(observe, str) else int(observe)
    if not 0 <= observed < n:
        raise InvalidSpinException("Observed spin is not active", spin=observe, n_spins=n)
    if readout_pulse is None:
        readout = [PulseOp.y(observed, np.pi / 2)]
    elif isinstance(readout_pulse, PulseOp):
        readout = [readout_pulse]
    else:
        readout = list(readout_pulse)

    simulator = SpinSimulator(molecule)
    for op in readout:
        rho = simulator.apply_pulse(rho, op)

    couplings = molecule.active_couplings()[observed]
    neighbour_couplings = tuple(float(couplings[p]) for p in range(n) if p != observed)
    center = float(molecule.active_shifts()[observed])
    spectrum = Spectrum(observed, molecule.active_labels[observed], center, neighbour_couplings)
    scale = REFERENCE_COHERENCE / abs(REFERENCE_COHERENCE) ** 2
    for neighbours, row, column in _neighbour_pairs(n, observed):
        coherence = complex(rho.matrix[row, column])
        spectrum.lines.append(
            SpectralLine(
                frequency=line_frequency(center, neighbour_couplings, neighbours),
                amplitude=float(np.real(coherence * np.conj(scale))),
                assignment="".join(map(str, neighbours)),
                coherence=coherence,
            )
        )
    spectrum.lines.sort(key=lambda line: line.frequency)
    return spectrum


def assignment_collisions(
    spectrum: Spectrum, resolution: float = settings.FREQUENCY_RESOLUTION_HZ
) -> List[Tuple[str, str, float]]:
    candidates = [
        ("".join(map(str, bits)), line_frequency(spectrum.center_hz, spectrum.couplings_hz, bits))
        for bits in product((0, 1), repeat=len(spectrum.couplings_hz))
    ]
    collisions = []
    for i, (a, fa) in enumerate(candidates):
        for b, fb in candidates[i + 1:]:
            if abs(fa - fb) < resolution:
                collisions.append((a, b, abs(fa - fb)))
    return collisions


def decode_observer_readout(
    spectrum: Spectrum,
    observer: Optional[int] = None,
    resolution: float = settings.FREQUENCY_RESOLUTION_HZ,
    threshold: float = LINE_THRESHOLD,
) -> List[Tuple[str, float]]:
    """
    Map observer lines back to computational basis states of the other spins,
    strongest first.
    """
    if observer is not None and observer != spectrum.observed:
        raise InvalidSpinException(
            "Spectrum was not acquired on the observer", observer=observer, observed=spectrum.observed
        )
    collisions = assignment_collisions(spectrum, resolution)
    if collisions:
        raise AmbiguousAssignmentException("Observer lines are not resolved", collisions=collisions)

    table = {
        "".join(map(str, bits)): line_frequency(spectrum.center_hz, spectrum.couplings_hz, bits)
        for bits in product((0, 1), repeat=len(spectrum.couplings_hz))
    }
    decoded = []
    for line in spectrum.present_lines(threshold):
        state, frequency = min(table.items(), key=lambda item: abs(item[1] - line.frequency))
        if abs(frequency - line.frequency) >= resolution:
            raise AmbiguousAssignmentException(
                "Line matches no assignment", collisions=[], frequency=line.frequency
            )
        decoded.append((state, line.amplitude))
    decoded.sort(key=lambda item: (-item[1], item[0]))
    return decoded


@dataclass
class TomogramResult:
    reconstructed: DensityMatrix
    readout_set: List[str]
    residual: float
    rank: int

    def to_dict(self) -> Dict[str, object]:
        matrix = self.reconstructed.matrix
        return {
            "dimension": int(matrix.shape[0]),
            "residual": self.residual,
            "readout_set": self.readout_set,
            "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in matrix],
        }


READOUT_CHOICES = ("-", "x", "y")


def readout_set(n_spins: int) -> List[Tuple[str, ...]]:
    """No pulse, [pi/2]_x or [pi/2]_y on each spin: 3^n combinations."""
    return list(product(READOUT_CHOICES, repeat=n_spins))


def _readout_ops(choice: Sequence[str]) -> List[PulseOp]:
    return [PulseOp.rf(p, axis, np.pi / 2) for p, axis in enumerate(choice) if axis != "-"]


@lru_cache(maxsize=8)
def _readout_unitaries(n_spins: int) -> Tuple[np.ndarray, ...]:
    unitaries = []
    for choice in readout_set(n_spins):
        unitary = np.eye(2**n_spins, dtype=complex)
        for op in _readout_ops(choice):
            unitary = op.unitary(n_spins) @ unitary
        unitaries.append(unitary)
    return tuple(unitaries)


def _measurements(matrix: np.ndarray, n_spins: int) -> np.ndarray:
    """Real and imaginary parts of every observable coherence over the readout set."""
    rows = []
    columns = []
    for observed in range(n_spins):
        for _, row, column in _neighbour_pairs(n_spins, observed):
            rows.append(row)
            columns.append(column)
    values = []
    for unitary in _readout_unitaries(n_spins):
        rotated = unitary @ matrix @ unitary.conj().T
        coherences = rotated[rows, columns]
        values.append(coherences.real)
        values.append(coherences.imag)
    return np.concatenate(values)


def _spectral_measurements(deviation: DensityMatrix, molecule: MoleculeSpec) -> np.ndarray:
    """_measurements read off synthesized line lists, in the same order."""
    n = molecule.n_active
    values = []
    for choice in readout_set(n):
        ops = _readout_ops(choice)
        coherences = []
        for observed in range(n):
            spectrum = synthesize_spectrum(deviation, observed, molecule, readout_pulse=ops)
            by_assignment = {line.assignment: line.coherence for line in spectrum.lines}
            for neighbours, _, _ in _neighbour_pairs(n, observed):
                coherences.append(by_assignment["".join(map(str, neighbours))])
        coherences = np.array(coherences)
        values.append(coherences.real)
        values.append(coherences.imag)
    return np.concatenate(values)


def _hermitian_basis(dimension: int) -> List[np.ndarray]:
    basis = []
    for j in range(dimension):
        for k in range(j, dimension):
            if j == k:
                element = np.zeros((dimension, dimension), dtype=complex)
                element[j, j] = 1.0
                basis.append(element)
                continue
            symmetric = np.zeros((dimension, dimension), dtype=complex)
            symmetric[j, k] = symmetric[k, j] = 1.0
            antisymmetric = np.zeros((dimension, dimension), dtype=complex)
            antisymmetric[j, k], antisymmetric[k, j] = -1j, 1j
            basis.extend([symmetric, antisymmetric])
    return basis


@lru_cache(maxsize=8)
def _tomography_system(n_spins: int) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
    dimension = 2**n_spins
    basis = tuple(_hermitian_basis(dimension))
    columns = [_measurements(element, n_spins) for element in basis]
    trace_row = np.array([np.trace(element).real for element in basis])
    system = np.vstack([np.column_stack(columns), trace_row])
    return system, basis


def tomograph(rho_true: DensityMatrix, molecule: Optional[MoleculeSpec] = None) -> TomogramResult:
    """
    Reconstruct the deviation matrix from simulated readout spectra.

    Every readout in the set is followed by acquisition on every spin; the
    invisible identity part is fixed by a zero-trace row. With a molecule the
    coherences come from the synthesized line lists; without one they are
    read straight from the rotated matrix.
    """
    n = rho_true.n_spins
    if n > 3:
        raise SingularInversionException("Tomography is limited to three spins", n_spins=n)
    if molecule is not None and molecule.n_active != n:
        raise InvalidSpinException("State size does not match active spins", state=n, active=molecule.n_active)

    system, basis = _tomography_system(n)
    rank = int(np.linalg.matrix_rank(system))
    if rank < len(basis):
        raise SingularInversionException("Readout set does not determine the deviation matrix", rank=rank)

    deviation = rho_true.deviation()
    if molecule is None:
        measured = _measurements(deviation.matrix, n)
    else:
        measured = _spectral_measurements(deviation, molecule)
    observed = np.append(measured, 0.0)
    coefficients, *_ = np.linalg.lstsq(system, observed, rcond=None)
    reconstructed = sum(c * element for c, element in zip(coefficients, basis))
    result = TomogramResult(
        reconstructed=DensityMatrix(reconstructed, DensityKind.DEVIATION),
        readout_set=["".join(choice) for choice in readout_set(n)],
        residual=float(np.max(np.abs(reconstructed - deviation.matrix))),
        rank=rank,
    )
    logger.debug("Tomography on %d spins: rank %d, residual %.3e", n, rank, result.residual)
    return result


def attenuated_correlation(rho_th: DensityMatrix, rho_exp: DensityMatrix) -> float:
    """Re Tr(rho_th rho_exp) / Tr(rho_th rho_th) over deviation matrices."""
    if rho_th.dimension != rho_exp.dimension:
        raise UndefinedCorrelationException(
            "Density matrices differ in dimension", left=rho_th.dimension, right=rho_exp.dimension
        )
    theory = rho_th.deviation().matrix
    experiment = rho_exp.deviation().matrix
    denominator = float(np.real(np.trace(theory @ theory)))
    if abs(denominator) < 1e-15:
        raise UndefinedCorrelationException("Reference deviation matrix is zero")
    return float(np.real(np.trace(theory @ experiment))) / denominator


def _state_index(state: Union[int, str]) -> int:
    if isinstance(state, str):
        return int(state, 2)
    return int(state)


def infer_period_from_states(states: Iterable[Union[int, str]], n: int) -> Tuple[int, int]:
    """
    Spacing k of the support and the period r = N / k before the transform.

    The support must be a full arithmetic progression covering N / k points.
    """
    indices = sorted({_state_index(s) for s in states})
    dimension = 2**n
    if not indices:
        raise NotPeriodicSupportException("Empty support")
    if any(not 0 <= i < dimension for i in indices):
        raise NotPeriodicSupportException("State outside the register", states=indices, n=n)
    if len(indices) == 1:
        return dimension, 1
    spacing = indices[1] - indices[0]
    gaps = np.diff(indices)
    if np.any(gaps != spacing) or dimension % spacing or len(indices) * spacing != dimension:
        raise NotPeriodicSupportException("Support is not a periodic progression", states=indices)
    return spacing, dimension // spacing


def reduced_populations(rho: DensityMatrix, keep: Iterable[int]) -> Dict[str, float]:
    """Diagonal of the reduced matrix on the kept spins, keyed by bitstring."""
    keep = sorted(set(keep))
    reduced = partial_trace(rho, keep)
    return {
        bitstring(i, len(keep)): float(np.real(reduced.matrix[i, i])) for i in range(reduced.dimension)
    }


def lorentzian_trace(spectrum: Spectrum, grid: Sequence[float], linewidth: float = 1.0) -> np.ndarray:
    """Absorptive Lorentzian rendering of the line list on a frequency grid."""
    grid = np.asarray(grid, dtype=float)
    half = linewidth / 2
    trace = np.zeros_like(grid)
    for line in spectrum.lines:
        trace += line.amplitude * half**2 / ((grid - line.frequency) ** 2 + half**2)
    return trace

