"""
State Algebra Service
Exact dense linear algebra for small spin registers: state vectors, density
matrices, spin operators, tensor products, partial traces and Born-rule
statistics.

Positions are 0-based tensor-factor indices; position 0 is the most
significant bit of the basis label.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Iterable, List, Sequence, Union

import numpy as np

from config.settings import settings
from core.exceptions import (
    CapacityException,
    DeviationStateException,
    DimensionMismatchException,
    InvalidSubsystemException,
    NonUnitaryException,
    QStateException,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]

# Single spin-1/2 operators (Pauli / 2) and projectors
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SPIN_MATRICES = {
    "x": PAULI_X / 2,
    "y": PAULI_Y / 2,
    "z": PAULI_Z / 2,
    # I^alpha = |0><0| = 1/2 + I_z, I^beta = |1><1| = 1/2 - I_z
    "alpha": np.array([[1, 0], [0, 0]], dtype=complex),
    "beta": np.array([[0, 0], [0, 1]], dtype=complex),
    "identity": IDENTITY_2,
}


class DensityKind(str, Enum):
    """Physical states carry probabilities; deviations are traceless NMR observables"""
    PHYSICAL = "physical"
    DEVIATION = "deviation"


def _qubits_for_dimension(dimension: int) -> int:
    n = int(dimension).bit_length() - 1
    if n < 1 or 2**n != dimension:
        raise DimensionMismatchException(
            "Dimension is not a power of two", dimension=dimension
        )
    return n


def check_capacity(n_qubits: int) -> None:
    if n_qubits > settings.MAX_QUBITS:
        raise CapacityException(
            "Dense operand exceeds qubit capacity",
            n_qubits=n_qubits,
            max_qubits=settings.MAX_QUBITS,
        )


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over the 2^n computational basis."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        _qubits_for_dimension(amplitudes.size)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def basis(cls, index: int, n_qubits: int) -> "StateVector":
        check_capacity(n_qubits)
        if not 0 <= index < 2**n_qubits:
            raise InvalidSubsystemException(
                "Basis index out of range", index=index, n_qubits=n_qubits
            )
        amplitudes = np.zeros(2**n_qubits, dtype=complex)
        amplitudes[index] = 1.0
        return cls(amplitudes)

    @classmethod
    def from_amplitudes(cls, values: Iterable[complex], normalize: bool = False) -> "StateVector":
        amplitudes = np.asarray(list(values), dtype=complex)
        if normalize:
            norm = np.linalg.norm(amplitudes)
            if norm == 0:
                raise QStateException("Cannot normalize the zero vector")
            amplitudes = amplitudes / norm
        return cls(amplitudes)

    @property
    def n_qubits(self) -> int:
        return _qubits_for_dimension(self.amplitudes.size)

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tolerance: float = settings.NORM_TOLERANCE) -> bool:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0) <= tolerance

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), DensityKind.PHYSICAL)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Hermitian 2^n x 2^n matrix tagged as a physical state or a traceless deviation.

    The kind is never inferred: deviations such as I_1z + I_2z + I_3z must be
    built as DEVIATION so that probability-based operations refuse them.
    """

    matrix: np.ndarray
    kind: DensityKind = DensityKind.PHYSICAL

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchException("Density matrix must be square", shape=matrix.shape)
        _qubits_for_dimension(matrix.shape[0])
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "kind", DensityKind(self.kind))

    @classmethod
    def deviation_of(cls, matrix: np.ndarray) -> "DensityMatrix":
        """Traceless part of an arbitrary Hermitian matrix."""
        matrix = np.asarray(matrix, dtype=complex)
        dimension = matrix.shape[0]
        traceless = matrix - np.trace(matrix) / dimension * np.eye(dimension)
        return cls(traceless, DensityKind.DEVIATION)

    @property
    def n_spins(self) -> int:
        return _qubits_for_dimension(self.matrix.shape[0])

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_hermitian(self, tolerance: float = settings.NORM_TOLERANCE) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tolerance)

    def validate(self, tolerance: float = settings.NORM_TOLERANCE) -> None:
        """Check the invariants of the declared kind."""
        if not self.is_hermitian(tolerance):
            raise QStateException("Density matrix is not Hermitian")
        trace = self.trace()
        if self.kind is DensityKind.PHYSICAL:
            if abs(trace - 1.0) > tolerance:
                raise QStateException("Physical density matrix must have unit trace", trace=trace)
            if np.min(np.linalg.eigvalsh(self.matrix)) < -1e-10:
                raise QStateException("Physical density matrix has negative eigenvalues")
        elif abs(trace) > tolerance:
            raise QStateException("Deviation density matrix must be traceless", trace=trace)

    def deviation(self) -> "DensityMatrix":
        return DensityMatrix.deviation_of(self.matrix)

    def with_matrix(self, matrix: np.ndarray) -> "DensityMatrix":
        return DensityMatrix(matrix, self.kind)


@dataclass(frozen=True, eq=False)
class SpinOperator:
    """Operator on n spins with a product-operator label such as I_1z."""

    matrix: np.ndarray
    label: str = field(default="")

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @property
    def n_spins(self) -> int:
        return _qubits_for_dimension(self.matrix.shape[0])

    def __add__(self, other: "SpinOperator") -> "SpinOperator":
        return SpinOperator(self.matrix + other.matrix, f"{self.label}+{other.label}")

    def __matmul__(self, other: "SpinOperator") -> "SpinOperator":
        return SpinOperator(self.matrix @ other.matrix, f"{self.label}{other.label}")

    def scaled(self, factor: complex) -> "SpinOperator":
        return SpinOperator(factor * self.matrix, f"{factor}*{self.label}")


Operand = Union[StateVector, DensityMatrix, SpinOperator, np.ndarray]


def spin_operator(n_spins: int, position: int, component: str) -> SpinOperator:
    """Single-spin operator (x, y, z, alpha, beta) at one position, identity elsewhere."""
    if not 0 <= position < n_spins:
        raise InvalidSubsystemException("Spin position out of range", position=position, n_spins=n_spins)
    if component not in SPIN_MATRICES:
        raise QStateException("Unknown spin operator component", component=component)
    check_capacity(n_spins)
    factors = [IDENTITY_2] * n_spins
    factors[position] = SPIN_MATRICES[component]
    suffix = {"alpha": "^alpha", "beta": "^beta", "identity": ""}.get(component, component)
    return SpinOperator(reduce(np.kron, factors), f"I_{position}{suffix}")


def product_operator(n_spins: int, components: dict) -> SpinOperator:
    """Product of single-spin operators, e.g. {0: "z", 1: "alpha"} -> I_0z I_1^alpha."""
    check_capacity(n_spins)
    factors = [IDENTITY_2] * n_spins
    for position, component in components.items():
        factors[position] = SPIN_MATRICES[component]
    label = "".join(f"I_{p}{c}" for p, c in sorted(components.items()))
    return SpinOperator(reduce(np.kron, factors), label)


def tensor(*operands: Operand) -> Operand:
    """
    Kronecker product in declared order (first operand = most significant).

    Operands must all be state vectors, or all matrices (density matrices,
    spin operators or raw arrays). The result has the kind of the operands.
    """
    if not operands:
        raise QStateException("tensor needs at least one operand")
    if len(operands) == 1 and isinstance(operands[0], (list, tuple)):
        operands = tuple(operands[0])

    if all(isinstance(op, StateVector) for op in operands):
        n_total = sum(op.n_qubits for op in operands)
        check_capacity(n_total)
        return StateVector(reduce(np.kron, [op.amplitudes for op in operands]))

    if any(isinstance(op, StateVector) for op in operands):
        raise DimensionMismatchException("Cannot tensor state vectors with matrices")

    matrices = [op.matrix if isinstance(op, (DensityMatrix, SpinOperator)) else np.asarray(op) for op in operands]
    n_total = sum(_qubits_for_dimension(m.shape[0]) for m in matrices)
    check_capacity(n_total)
    product = reduce(np.kron, matrices)
    if all(isinstance(op, DensityMatrix) for op in operands):
        kind = (
            DensityKind.PHYSICAL
            if all(op.kind is DensityKind.PHYSICAL for op in operands)
            else DensityKind.DEVIATION
        )
        return DensityMatrix(product, kind)
    if all(isinstance(op, SpinOperator) for op in operands):
        return SpinOperator(product, "".join(op.label for op in operands))
    return product


def qubit_permutation(destinations: Sequence[int]) -> np.ndarray:
    """
    Permutation matrix moving the qubit at position i to position destinations[i].
    """
    n = len(destinations)
    if sorted(destinations) != list(range(n)):
        raise InvalidSubsystemException("Not a permutation", destinations=list(destinations))
    check_capacity(n)
    dimension = 2**n
    indices = np.arange(dimension)
    new_indices = np.zeros(dimension, dtype=int)
    for source, target in enumerate(destinations):
        bit = (indices >> (n - 1 - source)) & 1
        new_indices |= bit << (n - 1 - target)
    permutation = np.zeros((dimension, dimension), dtype=complex)
    permutation[new_indices, indices] = 1.0
    return permutation


def embed(operator: np.ndarray, positions: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift a k-qubit operator acting on the given positions to n qubits."""
    operator = np.asarray(operator, dtype=complex)
    k = _qubits_for_dimension(operator.shape[0])
    positions = list(positions)
    if len(positions) != k or len(set(positions)) != k:
        raise InvalidSubsystemException("Operator arity does not match positions", positions=positions)
    if any(not 0 <= p < n_qubits for p in positions):
        raise InvalidSubsystemException("Position out of range", positions=positions, n_qubits=n_qubits)
    check_capacity(n_qubits)
    rest = [p for p in range(n_qubits) if p not in positions]
    full = np.kron(operator, np.eye(2 ** len(rest), dtype=complex))
    if positions == list(range(k)):
        return full
    permutation = qubit_permutation(positions + rest)
    return permutation @ full @ permutation.T


def unitarity_residual(unitary: np.ndarray) -> float:
    unitary = np.asarray(unitary, dtype=complex)
    identity = np.eye(unitary.shape[0])
    return float(np.max(np.abs(unitary.conj().T @ unitary - identity)))


def apply_unitary(
    state: Union[StateVector, DensityMatrix],
    unitary: np.ndarray,
    tolerance: float = settings.UNITARY_TOLERANCE,
) -> Union[StateVector, DensityMatrix]:
    """|psi> -> U|psi>, rho -> U rho U^dagger."""
    unitary = np.asarray(unitary, dtype=complex)
    if unitary.shape != (state.dimension, state.dimension):
        raise DimensionMismatchException(
            "Unitary does not match state dimension",
            unitary_shape=unitary.shape,
            dimension=state.dimension,
        )
    residual = unitarity_residual(unitary)
    if residual > tolerance:
        raise NonUnitaryException("Operator is not unitary", residual=residual)
    if isinstance(state, StateVector):
        return StateVector(unitary @ state.amplitudes)
    return state.with_matrix(unitary @ state.matrix @ unitary.conj().T)


def measure_distribution(state: Union[StateVector, DensityMatrix]) -> np.ndarray:
    """Born-rule probabilities over basis labels 0..2^n-1."""
    if isinstance(state, DensityMatrix):
        if state.kind is DensityKind.DEVIATION:
            raise DeviationStateException(
                "Deviation density matrices carry no probabilities; use a physical state"
            )
        probabilities = np.real(np.diag(state.matrix)).copy()
    else:
        probabilities = np.abs(state.amplitudes) ** 2

    if np.min(probabilities) < -settings.NORM_TOLERANCE:
        raise QStateException("Negative probability", minimum=float(np.min(probabilities)))
    probabilities[probabilities < 0] = 0.0
    total = float(np.sum(probabilities))
    if abs(total - 1.0) > 1e-10:
        raise QStateException("State is not normalized", total=total)
    return probabilities


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on the kept positions (kept in tensor order)."""
    n = rho.n_spins
    keep = sorted(set(keep))
    if not keep:
        raise InvalidSubsystemException("partial_trace needs a nonempty subset to keep")
    if any(not 0 <= p < n for p in keep):
        raise InvalidSubsystemException("Kept position out of range", keep=keep, n_spins=n)
    traced = [p for p in range(n) if p not in keep]
    if not traced:
        return rho
    order = keep + traced
    tensor_form = rho.matrix.reshape([2] * (2 * n))
    tensor_form = tensor_form.transpose(order + [p + n for p in order])
    kept_dim, traced_dim = 2 ** len(keep), 2 ** len(traced)
    blocks = tensor_form.reshape(kept_dim, traced_dim, kept_dim, traced_dim)
    return DensityMatrix(np.einsum("ajbj->ab", blocks), rho.kind)


def sample(
    state: Union[StateVector, DensityMatrix],
    rng_seed: SeedLike,
    shots: int,
) -> List[int]:
    """Independent measurement outcomes; identical for identical seeds."""
    if shots < 0:
        raise QStateException("shots must be nonnegative", shots=shots)
    if shots == 0:
        return []
    probabilities = measure_distribution(state)
    rng = as_generator(rng_seed)
    outcomes = rng.choice(probabilities.size, size=shots, p=probabilities / probabilities.sum())
    return [int(o) for o in outcomes]
