"""
Circuit Service
Gate-level model of the QFT: Hadamard, controlled phase R_d, swap, and the
measurement-conditioned (semiclassical) variant.

Qubits are numbered 1..n with qubit 1 the most significant bit.

Text format, one statement per line, `#` starts a comment:

    QUBITS 3            register size (optional, inferred when absent)
    H 1                 Hadamard on qubit 1
    CR 2 1 d=1          controlled R_d, control 2, target 1
    SWAP 1 3
    MEASURE 1           z measurement into classical bit 1
    CRZ 2 d=1 bit=1     R_d on qubit 2 when classical bit 1 is set
    RELABEL 3 2 1       logical qubit q is read from physical qubit RELABEL[q]
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.exceptions import (
    CapacityException,
    CircuitSyntaxException,
    InvalidGateException,
    MeasurementInCircuitException,
)
from services.qstate import (
    DensityMatrix,
    SeedLike,
    StateVector,
    as_generator,
    embed,
    qubit_permutation,
)
from services.utils import bits_to_index

logger = logging.getLogger(__name__)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


class GateKind(str, Enum):
    HADAMARD = "H"
    CONTROLLED_R = "CR"
    SWAP = "SWAP"
    MEASURE_Z = "MEASURE"
    CONDITIONAL_R = "CRZ"


def phase_gate(d: int) -> np.ndarray:
    """R_d = diag(1, exp(i*pi/2^d))."""
    return np.diag([1.0, np.exp(1j * math.pi / 2**d)]).astype(complex)


def controlled_phase(d: int) -> np.ndarray:
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * math.pi / 2**d)]).astype(complex)


@dataclass(frozen=True)
class Gate:
    """
    One circuit element. Which fields are meaningful depends on kind:
    HADAMARD/MEASURE_Z use target; CONTROLLED_R uses control, target, d;
    SWAP uses target and control as the two swapped qubits; CONDITIONAL_R
    uses target, d and classical_bit.
    """

    kind: GateKind
    target: int
    control: Optional[int] = None
    d: Optional[int] = None
    classical_bit: Optional[int] = None

    @classmethod
    def hadamard(cls, target: int) -> "Gate":
        return cls(GateKind.HADAMARD, target)

    @classmethod
    def controlled_r(cls, control: int, target: int, d: int) -> "Gate":
        return cls(GateKind.CONTROLLED_R, target, control=control, d=d)

    @classmethod
    def swap(cls, a: int, b: int) -> "Gate":
        return cls(GateKind.SWAP, a, control=b)

    @classmethod
    def measure(cls, target: int) -> "Gate":
        return cls(GateKind.MEASURE_Z, target)

    @classmethod
    def conditional_r(cls, target: int, d: int, classical_bit: int) -> "Gate":
        return cls(GateKind.CONDITIONAL_R, target, d=d, classical_bit=classical_bit)

    @property
    def qubits(self) -> Tuple[int, ...]:
        if self.kind in (GateKind.CONTROLLED_R, GateKind.SWAP):
            return (self.control, self.target)
        return (self.target,)

    @property
    def is_classical(self) -> bool:
        return self.kind in (GateKind.MEASURE_Z, GateKind.CONDITIONAL_R)

    def matrix(self) -> np.ndarray:
        """Matrix on self.qubits (in that order)."""
        if self.kind is GateKind.HADAMARD:
            return HADAMARD
        if self.kind is GateKind.CONTROLLED_R:
            return controlled_phase(self.d)
        if self.kind is GateKind.SWAP:
            return SWAP
        if self.kind is GateKind.CONDITIONAL_R:
            return phase_gate(self.d)
        raise MeasurementInCircuitException(
            "Measurement has no unitary matrix; use run_semiclassical_qft", gate=self.to_text()
        )

    def to_text(self) -> str:
        if self.kind is GateKind.HADAMARD:
            return f"H {self.target}"
        if self.kind is GateKind.CONTROLLED_R:
            return f"CR {self.control} {self.target} d={self.d}"
        if self.kind is GateKind.SWAP:
            return f"SWAP {self.target} {self.control}"
        if self.kind is GateKind.MEASURE_Z:
            return f"MEASURE {self.target}"
        return f"CRZ {self.target} d={self.d} bit={self.classical_bit}"


@dataclass(frozen=True)
class QuantumCircuit:
    n_qubits: int
    gates: Tuple[Gate, ...] = ()
    classical_bits: int = 0
    # relabeling[q-1] = physical qubit holding logical qubit q; None means identity
    relabeling: Optional[Tuple[int, ...]] = None
    metadata: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= settings.MAX_QUBITS:
            raise CapacityException(
                "Circuit size out of range", n_qubits=self.n_qubits, max_qubits=settings.MAX_QUBITS
            )
        for gate in self.gates:
            _validate_gate(gate, self.n_qubits, self.classical_bits)
        if self.relabeling is not None:
            relabeling = tuple(int(q) for q in self.relabeling)
            if sorted(relabeling) != list(range(1, self.n_qubits + 1)):
                raise InvalidGateException("Relabeling is not a permutation of the qubits", relabeling=relabeling)
            object.__setattr__(self, "relabeling", relabeling)

    @property
    def is_semiclassical(self) -> bool:
        return any(gate.is_classical for gate in self.gates)

    def count(self, kind: GateKind) -> int:
        return sum(1 for gate in self.gates if gate.kind is kind)


def _validate_gate(gate: Gate, n_qubits: int, classical_bits: int) -> None:
    for qubit in gate.qubits:
        if qubit is None or not 1 <= qubit <= n_qubits:
            raise InvalidGateException("Gate qubit out of range", gate=gate.to_text(), n_qubits=n_qubits)
    if len(set(gate.qubits)) != len(gate.qubits):
        raise InvalidGateException("Two-qubit gate needs distinct qubits", gate=gate.to_text())
    if gate.kind in (GateKind.CONTROLLED_R, GateKind.CONDITIONAL_R) and (gate.d is None or gate.d < 1):
        raise InvalidGateException("Phase index d must be at least 1", gate=gate.to_text())
    if gate.is_classical:
        if classical_bits == 0:
            raise InvalidGateException(
                "Measurement gates need a semiclassical circuit with classical bits", gate=gate.to_text()
            )
        if gate.kind is GateKind.CONDITIONAL_R and not 1 <= gate.classical_bit <= classical_bits:
            raise InvalidGateException("Classical bit out of range", gate=gate.to_text())
        if gate.kind is GateKind.MEASURE_Z and gate.target > classical_bits:
            raise InvalidGateException("No classical bit for measured qubit", gate=gate.to_text())


def _check_size(n: int) -> None:
    if not 1 <= n <= settings.MAX_QUBITS:
        raise CapacityException("Qubit count out of range", n_qubits=n, max_qubits=settings.MAX_QUBITS)


def qft_matrix(n: int) -> np.ndarray:
    """F[y, x] = exp(2*pi*i*x*y/N) / sqrt(N)."""
    _check_size(n)
    dimension = 2**n
    indices = np.arange(dimension)
    # reduce x*y mod N before scaling so large exponents stay exact
    exponents = np.outer(indices, indices) % dimension
    return np.exp(2j * math.pi * exponents / dimension) / math.sqrt(dimension)


def apply_qft(state: StateVector) -> StateVector:
    """QFT of a state vector via the orthonormal inverse FFT (same sign convention as qft_matrix)."""
    return StateVector(np.fft.ifft(state.amplitudes, norm="ortho"))


def inverse_qft_matrix(n: int) -> np.ndarray:
    return qft_matrix(n).conj().T


def bit_reversal_permutation(n: int) -> np.ndarray:
    """Permutation |x_1 ... x_n> -> |x_n ... x_1>."""
    _check_size(n)
    return qubit_permutation([n - 1 - p for p in range(n)])


def relabeling_permutation(relabeling: Sequence[int]) -> np.ndarray:
    """
    Permutation taking physical basis labels to logical ones.

    relabeling[q-1] is the physical qubit read out as logical qubit q.
    """
    destinations = [0] * len(relabeling)
    for logical, physical in enumerate(relabeling):
        destinations[physical - 1] = logical
    return qubit_permutation(destinations)


def build_qft_circuit(n: int, include_swaps: bool = True) -> QuantumCircuit:
    """
    Hadamards and controlled phases in the standard order, then the output
    reversal: swaps when include_swaps, otherwise a recorded relabeling.
    """
    _check_size(n)
    gates: List[Gate] = []
    for j in range(1, n + 1):
        gates.append(Gate.hadamard(j))
        for k in range(j + 1, n + 1):
            gates.append(Gate.controlled_r(control=k, target=j, d=k - j))

    reversal = tuple(range(n, 0, -1))
    if include_swaps:
        gates.extend(Gate.swap(q, n + 1 - q) for q in range(1, n // 2 + 1))
        return QuantumCircuit(n, tuple(gates))
    return QuantumCircuit(
        n,
        tuple(gates),
        relabeling=reversal if n > 1 else None,
        metadata={"relabeling": "bit reversal replaces the terminal swaps"},
    )


def build_semiclassical_qft_circuit(n: int) -> QuantumCircuit:
    """
    QFT with every controlled phase replaced by a rotation conditioned on an
    earlier measurement. Qubit j is measured into classical bit j; the output
    integer is read with qubit 1 as least significant bit.
    """
    _check_size(n)
    gates: List[Gate] = []
    for j in range(1, n + 1):
        for k in range(1, j):
            gates.append(Gate.conditional_r(target=j, d=j - k, classical_bit=k))
        gates.append(Gate.hadamard(j))
        gates.append(Gate.measure(j))
    return QuantumCircuit(n, tuple(gates), classical_bits=n, relabeling=tuple(range(n, 0, -1)))


def circuit_unitary(circuit: QuantumCircuit) -> np.ndarray:
    """Physical unitary: gate matrices multiplied in order, relabeling not applied."""
    if circuit.is_semiclassical:
        raise MeasurementInCircuitException(
            "Circuit contains measurements; use run_semiclassical_qft instead"
        )
    dimension = 2**circuit.n_qubits
    unitary = np.eye(dimension, dtype=complex)
    for gate in circuit.gates:
        positions = [q - 1 for q in gate.qubits]
        unitary = embed(gate.matrix(), positions, circuit.n_qubits) @ unitary
    return unitary


def logical_unitary(circuit: QuantumCircuit) -> np.ndarray:
    """Circuit unitary followed by the output relabeling, if any."""
    unitary = circuit_unitary(circuit)
    if circuit.relabeling is None:
        return unitary
    return relabeling_permutation(circuit.relabeling) @ unitary


def outcome_from_bits(bits: Sequence[int]) -> int:
    """Integer read from semiclassical measurements (classical bit 1 least significant)."""
    return bits_to_index(tuple(reversed(bits)))


def _measure_qubit(
    amplitudes: np.ndarray, position: int, n: int, rng: np.random.Generator
) -> Tuple[int, np.ndarray]:
    indices = np.arange(amplitudes.size)
    is_one = ((indices >> (n - 1 - position)) & 1).astype(bool)
    p_one = float(np.sum(np.abs(amplitudes[is_one]) ** 2))
    bit = int(rng.random() < p_one)
    keep = is_one if bit else ~is_one
    collapsed = np.where(keep, amplitudes, 0.0)
    return bit, collapsed / np.linalg.norm(collapsed)


def execute_semiclassical(
    circuit: QuantumCircuit, state: StateVector, rng_seed: SeedLike
) -> Tuple[Tuple[int, ...], StateVector]:
    """Run one shot of a circuit with measurements and classically conditioned gates."""
    n = circuit.n_qubits
    if state.n_qubits != n:
        raise InvalidGateException("State size does not match circuit", state=state.n_qubits, circuit=n)
    rng = as_generator(rng_seed)
    amplitudes = state.amplitudes.copy()
    bits = [0] * circuit.classical_bits
    for gate in circuit.gates:
        if gate.kind is GateKind.MEASURE_Z:
            bits[gate.target - 1], amplitudes = _measure_qubit(amplitudes, gate.target - 1, n, rng)
            continue
        if gate.kind is GateKind.CONDITIONAL_R and not bits[gate.classical_bit - 1]:
            continue
        positions = [q - 1 for q in gate.qubits]
        amplitudes = embed(gate.matrix(), positions, n) @ amplitudes
    return tuple(bits), StateVector(amplitudes)


def run_semiclassical_qft(state: StateVector, rng_seed: SeedLike) -> Tuple[Tuple[int, ...], StateVector]:
    """
    One shot of the measurement-conditioned QFT.

    Returns the measured bits (qubit 1 first) and the collapsed register;
    outcome_from_bits turns the bits into the QFT output label. Only
    single-qubit operations are applied.
    """
    circuit = build_semiclassical_qft_circuit(state.n_qubits)
    return execute_semiclassical(circuit, state, rng_seed)


def sample_semiclassical_qft(state: StateVector, shots: int, rng_seed: SeedLike) -> List[int]:
    """Outcome labels of repeated independent shots drawn from one generator."""
    rng = as_generator(rng_seed)
    circuit = build_semiclassical_qft_circuit(state.n_qubits)
    outcomes = []
    for _ in range(shots):
        bits, _ = execute_semiclassical(circuit, state, rng)
        outcomes.append(outcome_from_bits(bits))
    logger.debug("Sampled %d semiclassical QFT shots on %d qubits", shots, state.n_qubits)
    return outcomes


def dephase_qubit(matrix: np.ndarray, position: int, n: int) -> np.ndarray:
    """Remove coherences between the |0> and |1> sectors of one qubit."""
    indices = np.arange(matrix.shape[0])
    bit = (indices >> (n - 1 - position)) & 1
    return np.where(bit[:, None] == bit[None, :], matrix, 0.0)


def semiclassical_qft_density(rho: DensityMatrix) -> DensityMatrix:
    """
    Ensemble form of the semiclassical QFT: every measurement is replaced by
    dephasing, every conditioned rotation by the rotation averaged over the
    measured branches. The result is diagonal and its populations, read with
    outcome_from_bits ordering, equal the QFT outcome distribution for the
    periodic input states.
    """
    n = rho.n_spins
    matrix = rho.matrix.copy()
    for j in range(1, n + 1):
        for k in range(1, j):
            rotation = controlled_phase(j - k)
            positions = [k - 1, j - 1]
            unitary = embed(rotation, positions, n)
            matrix = unitary @ matrix @ unitary.conj().T
        hadamard = embed(HADAMARD, [j - 1], n)
        matrix = hadamard @ matrix @ hadamard.conj().T
        matrix = dephase_qubit(matrix, j - 1, n)
    return rho.with_matrix(matrix)


def format_circuit(circuit: QuantumCircuit) -> str:
    lines = [f"QUBITS {circuit.n_qubits}"]
    lines.extend(gate.to_text() for gate in circuit.gates)
    if circuit.relabeling is not None:
        lines.append("RELABEL " + " ".join(str(q) for q in circuit.relabeling))
    return "\n".join(lines) + "\n"


def _parse_keyword(token: str, name: str, line_number: int) -> int:
    prefix = f"{name}="
    if not token.startswith(prefix):
        raise CircuitSyntaxException(f"Expected {prefix}<int>", line=line_number, token=token)
    try:
        return int(token[len(prefix):])
    except ValueError:
        raise CircuitSyntaxException(f"Invalid integer in {token}", line=line_number)


def _parse_int(token: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise CircuitSyntaxException("Expected a qubit number", line=line_number, token=token)


def parse_circuit(text: str, n_qubits: Optional[int] = None) -> QuantumCircuit:
    gates: List[Gate] = []
    relabeling: Optional[Tuple[int, ...]] = None
    declared = n_qubits

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        head = head.upper()
        expected = {"QUBITS": 1, "H": 1, "MEASURE": 1, "CR": 3, "SWAP": 2, "CRZ": 3}
        if head == "RELABEL":
            relabeling = tuple(_parse_int(a, line_number) for a in args)
            continue
        if head not in expected:
            raise CircuitSyntaxException("Unknown statement", line=line_number, statement=head)
        if len(args) != expected[head]:
            raise CircuitSyntaxException(
                f"{head} takes {expected[head]} arguments", line=line_number, found=len(args)
            )
        if head == "QUBITS":
            declared = _parse_int(args[0], line_number)
        elif head == "H":
            gates.append(Gate.hadamard(_parse_int(args[0], line_number)))
        elif head == "MEASURE":
            gates.append(Gate.measure(_parse_int(args[0], line_number)))
        elif head == "SWAP":
            gates.append(Gate.swap(_parse_int(args[0], line_number), _parse_int(args[1], line_number)))
        elif head == "CR":
            gates.append(
                Gate.controlled_r(
                    _parse_int(args[0], line_number),
                    _parse_int(args[1], line_number),
                    _parse_keyword(args[2], "d", line_number),
                )
            )
        else:
            gates.append(
                Gate.conditional_r(
                    _parse_int(args[0], line_number),
                    _parse_keyword(args[1], "d", line_number),
                    _parse_keyword(args[2], "bit", line_number),
                )
            )

    if declared is None:
        used = [q for gate in gates for q in gate.qubits]
        if not used:
            raise CircuitSyntaxException("Cannot infer register size from an empty circuit", line=0)
        declared = max(used)
    classical_bits = declared if any(g.is_classical for g in gates) else 0
    return QuantumCircuit(declared, tuple(gates), classical_bits=classical_bits, relabeling=relabeling)
