"""
Pulse Compiler Service
Lowers gate circuits to NMR pulse programs, simplifies them with commutation
rules, elides terminal swaps by relabeling, and checks unitary equivalence up
to a global phase.

Programs are time ordered: ops[0] acts first, so the program unitary is
    U = PI * F * P_m ... P_2 P_1
with F the absorbed final z frame and PI the output relabeling.

Propagators (spin positions are 0-based):
    X_j(t) = exp(-i t I_jx)
    Y_j(t) = exp(+i t I_jy)
    Z_j(t) = exp(-i t I_jz / 2)
    J_jk(t) = exp(-i t I_jz I_kz)
With these, X_j(pi) Y_j(pi/2) is a Hadamard and Z_j(pi/2^d) Z_k(pi/2^d)
J_jk(-pi/2^d) is diag(1, 1, 1, exp(i pi/2^d)), both up to global phase.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.exceptions import (
    DimensionMismatchException,
    IncoherentProgramException,
    InvalidGateException,
    PulseCompilerException,
    UnsupportedGateException,
)
from services.circuits import Gate, GateKind, QuantumCircuit
from services.qstate import check_capacity, embed, qubit_permutation
from services.utils import TWO_PI, is_multiple_of, normalize_angle

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


class PulseKind(str, Enum):
    RF = "rf"
    COUPLING = "coupling"
    DELAY = "delay"
    GRADIENT = "gradient"


class HadamardVariant(str, Enum):
    XY = "xy"  # X(pi) then Y(pi/2)
    YX = "yx"  # Y(-pi/2) then X(pi)


@dataclass(frozen=True)
class PulseOp:
    kind: PulseKind
    spins: Tuple[int, ...] = ()
    axis: Optional[str] = None
    angle: float = 0.0
    duration: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "spins", tuple(int(s) for s in self.spins))
        if self.kind in (PulseKind.RF, PulseKind.COUPLING):
            object.__setattr__(self, "angle", normalize_angle(float(self.angle)))
        if self.kind is PulseKind.RF and self.axis not in ("x", "y", "z"):
            raise PulseCompilerException("RF axis must be x, y or z", axis=self.axis)
        if self.kind is PulseKind.COUPLING and (len(self.spins) != 2 or self.spins[0] == self.spins[1]):
            raise PulseCompilerException("Coupling needs two distinct spins", spins=self.spins)
        if self.kind is PulseKind.DELAY and self.duration < 0:
            raise PulseCompilerException("Delay duration must be nonnegative", duration=self.duration)

    @classmethod
    def rf(cls, spin: int, axis: str, angle: float) -> "PulseOp":
        return cls(PulseKind.RF, (spin,), axis=axis, angle=angle)

    @classmethod
    def x(cls, spin: int, angle: float) -> "PulseOp":
        return cls.rf(spin, "x", angle)

    @classmethod
    def y(cls, spin: int, angle: float) -> "PulseOp":
        return cls.rf(spin, "y", angle)

    @classmethod
    def z(cls, spin: int, angle: float) -> "PulseOp":
        return cls.rf(spin, "z", angle)

    @classmethod
    def coupling(cls, spin_a: int, spin_b: int, angle: float) -> "PulseOp":
        return cls(PulseKind.COUPLING, (spin_a, spin_b), angle=angle)

    @classmethod
    def delay(cls, duration: float, pair: Optional[Tuple[int, int]] = None) -> "PulseOp":
        """Free evolution; pair names the coupling the delay is meant to drive."""
        return cls(PulseKind.DELAY, tuple(pair) if pair else (), duration=duration)

    @classmethod
    def gradient(cls) -> "PulseOp":
        return cls(PulseKind.GRADIENT)

    @property
    def is_coherent(self) -> bool:
        return self.kind in (PulseKind.RF, PulseKind.COUPLING)

    @property
    def is_diagonal(self) -> bool:
        return self.kind is PulseKind.COUPLING or (self.kind is PulseKind.RF and self.axis == "z")

    @property
    def is_identity(self) -> bool:
        if self.kind is PulseKind.RF and self.axis in ("x", "y"):
            # X(2pi) = Y(2pi) = -1
            return is_multiple_of(self.angle, TWO_PI)
        if self.is_coherent:
            return self.angle == 0.0
        return False

    def merge_key(self) -> Optional[tuple]:
        if self.kind is PulseKind.RF:
            return ("rf", self.spins, self.axis)
        if self.kind is PulseKind.COUPLING:
            return ("coupling", frozenset(self.spins))
        return None

    def with_angle(self, angle: float) -> "PulseOp":
        return replace(self, angle=angle)

    def local_matrix(self) -> np.ndarray:
        """Propagator on self.spins."""
        half = self.angle / 2
        if self.kind is PulseKind.RF:
            if self.axis == "x":
                return math.cos(half) * np.eye(2) - 1j * math.sin(half) * PAULI_X
            if self.axis == "y":
                return math.cos(half) * np.eye(2) + 1j * math.sin(half) * PAULI_Y
            quarter = self.angle / 4
            return np.diag([np.exp(-1j * quarter), np.exp(1j * quarter)])
        if self.kind is PulseKind.COUPLING:
            quarter = self.angle / 4
            return np.diag(
                [np.exp(-1j * quarter), np.exp(1j * quarter), np.exp(1j * quarter), np.exp(-1j * quarter)]
            )
        raise IncoherentProgramException(
            "Delays and gradients have no fixed unitary; run them in the spin simulator", kind=self.kind.value
        )

    def unitary(self, n_spins: int) -> np.ndarray:
        return embed(self.local_matrix(), self.spins, n_spins)


def commutes(a: PulseOp, b: PulseOp) -> bool:
    """Sufficient commutation test: disjoint supports or both diagonal."""
    if a.kind is PulseKind.GRADIENT or b.kind is PulseKind.GRADIENT:
        return False
    if a.kind is PulseKind.DELAY or b.kind is PulseKind.DELAY:
        return False
    if not set(a.spins) & set(b.spins):
        return True
    return a.is_diagonal and b.is_diagonal


@dataclass(frozen=True)
class PulseProgram:
    n_spins: int
    ops: Tuple[PulseOp, ...] = ()
    # relabeling[q] = physical spin read out as logical spin q; None means identity
    relabeling: Optional[Tuple[int, ...]] = None
    # z rotations moved past the end of the program, as (spin, angle) pairs
    final_frame: Tuple[Tuple[int, float], ...] = ()
    first_label: int = 1
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        check_capacity(self.n_spins)
        for op in self.ops:
            if any(not 0 <= s < self.n_spins for s in op.spins):
                raise InvalidGateException("Pulse addresses a spin outside the program", spins=op.spins)
        if self.relabeling is not None:
            relabeling = tuple(int(q) for q in self.relabeling)
            if sorted(relabeling) != list(range(self.n_spins)):
                raise PulseCompilerException("Relabeling is not a permutation", relabeling=relabeling)
            object.__setattr__(
                self, "relabeling", None if relabeling == tuple(range(self.n_spins)) else relabeling
            )
        frame = tuple(sorted((int(s), normalize_angle(a)) for s, a in self.final_frame))
        object.__setattr__(self, "final_frame", tuple((s, a) for s, a in frame if a != 0.0))

    @property
    def is_coherent(self) -> bool:
        return all(op.is_coherent for op in self.ops)

    def __len__(self) -> int:
        return len(self.ops)

    def concatenated(self, other: "PulseProgram") -> "PulseProgram":
        if other.n_spins != self.n_spins:
            raise DimensionMismatchException("Programs act on different spin counts")
        if self.relabeling or self.final_frame:
            raise PulseCompilerException("Cannot append after a relabeled or framed program")
        return replace(
            other, ops=self.ops + other.ops, name=self.name or other.name, first_label=self.first_label
        )


def hadamard_sequence(spin: int, variant: HadamardVariant = HadamardVariant.XY) -> List[PulseOp]:
    if HadamardVariant(variant) is HadamardVariant.XY:
        return [PulseOp.x(spin, math.pi), PulseOp.y(spin, math.pi / 2)]
    return [PulseOp.y(spin, -math.pi / 2), PulseOp.x(spin, math.pi)]


def controlled_phase_sequence(control: int, target: int, d: int) -> List[PulseOp]:
    """Z_c(pi/2^d) Z_t(pi/2^d) J_ct(-pi/2^d); d = 0 gives a controlled-Z."""
    angle = math.pi / 2**d
    return [PulseOp.z(control, angle), PulseOp.z(target, angle), PulseOp.coupling(control, target, -angle)]


def cnot_sequence(control: int, target: int, variant: HadamardVariant = HadamardVariant.XY) -> List[PulseOp]:
    return (
        hadamard_sequence(target, variant)
        + controlled_phase_sequence(control, target, 0)
        + hadamard_sequence(target, variant)
    )


def conditional_phase_sequence(target: int, d: int) -> List[PulseOp]:
    """R_d = diag(1, exp(i pi/2^d)) as a single frame rotation (up to phase)."""
    return [PulseOp.z(target, 2 * math.pi / 2**d)]


def lower_gate(
    gate: Gate,
    layout: Optional[Sequence[int]] = None,
    variant: HadamardVariant = HadamardVariant.XY,
) -> List[PulseOp]:
    """
    Pulse ops realising one gate. layout maps circuit qubit q (1-based) to
    spin position layout[q-1]; identity when omitted.
    """
    def position(qubit: int) -> int:
        return layout[qubit - 1] if layout is not None else qubit - 1

    if gate.kind is GateKind.HADAMARD:
        return hadamard_sequence(position(gate.target), variant)
    if gate.kind is GateKind.CONTROLLED_R:
        return controlled_phase_sequence(position(gate.control), position(gate.target), gate.d)
    if gate.kind is GateKind.SWAP:
        a, b = position(gate.target), position(gate.control)
        return cnot_sequence(a, b, variant) + cnot_sequence(b, a, variant) + cnot_sequence(a, b, variant)
    raise UnsupportedGateException(
        "Gate has no coherent pulse realisation; conditioned gates are lowered per branch",
        gate=gate.to_text(),
    )


def compile(
    circuit: QuantumCircuit,
    elide_swaps: bool = True,
    variant: HadamardVariant = HadamardVariant.XY,
) -> PulseProgram:
    """
    Concatenate lowered gates. With elide_swaps, swaps only permute the
    logical-to-physical layout and the final layout becomes the relabeling.
    """
    layout = list(range(circuit.n_qubits))
    ops: List[PulseOp] = []
    elided = 0
    for gate in circuit.gates:
        if gate.kind is GateKind.SWAP and elide_swaps:
            a, b = gate.target - 1, gate.control - 1
            layout[a], layout[b] = layout[b], layout[a]
            elided += 1
            continue
        ops.extend(lower_gate(gate, layout, variant))
    if circuit.relabeling is not None:
        # logical q is read from circuit qubit relabeling[q-1], held by its layout spin
        layout = [layout[q - 1] for q in circuit.relabeling]
    logger.debug(
        "Compiled %d gates into %d pulse ops (%d swaps elided)", len(circuit.gates), len(ops), elided
    )
    return PulseProgram(circuit.n_qubits, tuple(ops), relabeling=tuple(layout))


def _drop_identities(ops: List[PulseOp]) -> bool:
    kept = [op for op in ops if not op.is_identity]
    changed = len(kept) != len(ops)
    ops[:] = kept
    return changed


def _merge_once(ops: List[PulseOp]) -> bool:
    for i, op in enumerate(ops):
        key = op.merge_key()
        if key is None:
            continue
        for j in range(i + 1, len(ops)):
            if ops[j].merge_key() == key:
                ops[j] = ops[j].with_angle(op.angle + ops[j].angle)
                del ops[i]
                return True
            if not commutes(op, ops[j]):
                break
    return False


def _absorb_trailing_z(ops: List[PulseOp], frame: Dict[int, float]) -> bool:
    for i in range(len(ops) - 1, -1, -1):
        op = ops[i]
        if op.kind is PulseKind.RF and op.axis == "z" and all(commutes(op, later) for later in ops[i + 1:]):
            spin = op.spins[0]
            frame[spin] = normalize_angle(frame.get(spin, 0.0) + op.angle)
            del ops[i]
            return True
    return False


def simplify(program: PulseProgram) -> PulseProgram:
    """
    Rewrite to a fixpoint: drop identity ops, merge same-axis rotations (and
    same-pair couplings) across commuting ops, and move z rotations that
    commute with everything after them into the final frame.
    """
    ops = list(program.ops)
    frame = dict(program.final_frame)
    changed = True
    while changed:
        changed = _drop_identities(ops)
        changed = _merge_once(ops) or changed
        if program.is_coherent:
            changed = _absorb_trailing_z(ops, frame) or changed
    result = replace(program, ops=tuple(ops), final_frame=tuple(frame.items()))
    logger.debug("Simplified %d pulse ops to %d", len(program.ops), len(result.ops))
    return result


def relabeling_matrix(relabeling: Sequence[int]) -> np.ndarray:
    """Permutation taking physical basis labels to logical ones."""
    destinations = [0] * len(relabeling)
    for logical, physical in enumerate(relabeling):
        destinations[physical] = logical
    return qubit_permutation(destinations)


def frame_unitary(program: PulseProgram) -> np.ndarray:
    unitary = np.eye(2**program.n_spins, dtype=complex)
    for spin, angle in program.final_frame:
        unitary = PulseOp.z(spin, angle).unitary(program.n_spins) @ unitary
    return unitary


def program_unitary(program: PulseProgram) -> np.ndarray:
    if not program.is_coherent:
        raise IncoherentProgramException(
            "Program contains delays or gradients; use the spin simulator"
        )
    unitary = np.eye(2**program.n_spins, dtype=complex)
    for op in program.ops:
        unitary = op.unitary(program.n_spins) @ unitary
    unitary = frame_unitary(program) @ unitary
    if program.relabeling is not None:
        unitary = relabeling_matrix(program.relabeling) @ unitary
    return unitary


@dataclass(frozen=True)
class EquivalenceReport:
    fidelity: float
    phase: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.fidelity >= 1.0 - self.tolerance

    def to_dict(self) -> Dict[str, object]:
        return {"fidelity": self.fidelity, "phase": self.phase, "pass": self.passed}


def assert_equivalent(
    u: np.ndarray, v: np.ndarray, tolerance: float = settings.EQUIVALENCE_TOLERANCE
) -> EquivalenceReport:
    """Global-phase-invariant fidelity |Tr(U^dagger V)|/dim and the phase arg Tr(U^dagger V)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.shape[0] != u.shape[1]:
        raise DimensionMismatchException("Operators differ in shape", left=u.shape, right=v.shape)
    overlap = np.trace(u.conj().T @ v)
    report = EquivalenceReport(
        fidelity=float(abs(overlap) / u.shape[0]),
        phase=float(np.angle(overlap)) if abs(overlap) > 0 else 0.0,
        tolerance=tolerance,
    )
    logger.debug("Equivalence fidelity %.12f (phase %.6f)", report.fidelity, report.phase)
    return report


# Published reduced three-qubit QFT sequence, read with spins 1 and 3 exchanged
REFERENCE_QFT_TEXT = (
    "X_1(-5pi/8) Y_1(pi/2) J_21(-pi/2) J_31(-pi/4) X_2(-pi/2) Y_2(-pi/4) "
    "X_2(-pi/4) Y_2(pi/2) J_32(-pi/2) Y_3(-pi/2) X_3(-5pi/8)"
)


def reference_qft_program() -> PulseProgram:
    pi = math.pi
    ops = (
        PulseOp.x(0, -5 * pi / 8),
        PulseOp.y(0, pi / 2),
        PulseOp.coupling(1, 0, -pi / 2),
        PulseOp.coupling(2, 0, -pi / 4),
        PulseOp.x(1, -pi / 2),
        PulseOp.y(1, -pi / 4),
        PulseOp.x(1, -pi / 4),
        PulseOp.y(1, pi / 2),
        PulseOp.coupling(2, 1, -pi / 2),
        PulseOp.y(2, -pi / 2),
        PulseOp.x(2, -5 * pi / 8),
    )
    return PulseProgram(3, ops, relabeling=(2, 1, 0), name="reference-qft")
