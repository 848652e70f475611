"""
Spin Simulator Service
Density-matrix execution of pulse programs on a weakly coupled spin system:
RF rotations, coupling evolution, free-precession delays and gradient
crushers, plus the pseudo-pure preparation sequences.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from config.settings import settings
from core.exceptions import InvalidSpinException, SimulationException, SpinCountException
from services.molecule import MoleculeSpec
from services.pulse_compiler import (
    PulseKind,
    PulseOp,
    PulseProgram,
    frame_unitary,
    relabeling_matrix,
)
from services.qstate import DensityKind, DensityMatrix, product_operator, spin_operator
from services.utils import TWO_PI

logger = logging.getLogger(__name__)


def magnetization_numbers(n_spins: int) -> np.ndarray:
    """Total M_z quantum number of every basis state (|0> contributes +1/2)."""
    indices = np.arange(2**n_spins)
    ones = np.array([bin(i).count("1") for i in indices])
    return n_spins / 2 - ones


def thermal_state(molecule: MoleculeSpec, weighted: bool = False) -> DensityMatrix:
    """
    Equilibrium deviation sum_i w_i I_iz; unit weights unless weighted, in
    which case each spin is scaled by its gyromagnetic ratio relative to 13C.
    """
    n = molecule.n_active
    if not 1 <= n <= 4:
        raise SpinCountException("Thermal state needs 1 to 4 active spins", n_active=n)
    weights = molecule.active_weights() if weighted else np.ones(n)
    matrix = sum(w * spin_operator(n, p, "z").matrix for p, w in enumerate(weights))
    return DensityMatrix(matrix, DensityKind.DEVIATION)


def hamiltonian(molecule: MoleculeSpec) -> np.ndarray:
    """Rotating-frame Hamiltonian in rad/s: shifts plus weak scalar couplings."""
    n = molecule.n_active
    shifts = molecule.active_shifts()
    couplings = molecule.active_couplings()
    h = np.zeros((2**n, 2**n), dtype=complex)
    for p in range(n):
        h += TWO_PI * shifts[p] * spin_operator(n, p, "z").matrix
    for a in range(n):
        for b in range(a + 1, n):
            if couplings[a, b] != 0.0:
                h += TWO_PI * couplings[a, b] * product_operator(n, {a: "z", b: "z"}).matrix
    return h


def apply_gradient(rho: DensityMatrix, diagonal_only: bool = False) -> DensityMatrix:
    """
    Crush every element connecting states of different total magnetization.
    With diagonal_only the zero-quantum coherences go too.
    """
    if diagonal_only:
        return rho.with_matrix(np.diag(np.diag(rho.matrix)))
    m = magnetization_numbers(rho.n_spins)
    keep = np.isclose(m[:, None], m[None, :])
    return rho.with_matrix(np.where(keep, rho.matrix, 0.0))


@dataclass
class SpinSimulator:
    """
    Pulse program executor bound to one molecule.

    strict_delays evolves delays under the full Hamiltonian; otherwise a delay
    evolves only the zz coupling of its declared pair (all couplings when it
    declares none), chemical shifts assumed refocused.
    """

    molecule: MoleculeSpec
    strict_delays: bool = False
    diagonal_gradient: bool = False
    _hamiltonian: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    @property
    def n_spins(self) -> int:
        return self.molecule.n_active

    def _check_spins(self, rho: DensityMatrix, op: PulseOp) -> None:
        if rho.n_spins != self.n_spins:
            raise SpinCountException(
                "State size does not match active spins", state=rho.n_spins, active=self.n_spins
            )
        for spin in op.spins:
            if not 0 <= spin < self.n_spins:
                raise InvalidSpinException("Pulse addresses an inactive spin", spin=spin, n_spins=self.n_spins)

    def delay_propagator(self, op: PulseOp) -> np.ndarray:
        n = self.n_spins
        if self.strict_delays:
            if self._hamiltonian is None:
                self._hamiltonian = hamiltonian(self.molecule)
            return expm(-1j * self._hamiltonian * op.duration)
        couplings = self.molecule.active_couplings()
        pairs = [op.spins] if op.spins else [(a, b) for a in range(n) for b in range(a + 1, n)]
        propagator = np.eye(2**n, dtype=complex)
        for a, b in pairs:
            angle = TWO_PI * couplings[a, b] * op.duration
            propagator = PulseOp.coupling(a, b, angle).unitary(n) @ propagator
        return propagator

    def apply_pulse(self, rho: DensityMatrix, op: PulseOp) -> DensityMatrix:
        self._check_spins(rho, op)
        if op.kind is PulseKind.GRADIENT:
            return apply_gradient(rho, self.diagonal_gradient)
        if op.kind is PulseKind.DELAY:
            unitary = self.delay_propagator(op)
        else:
            unitary = op.unitary(self.n_spins)
        return rho.with_matrix(unitary @ rho.matrix @ unitary.conj().T)

    def run_program(self, rho: DensityMatrix, program: PulseProgram) -> DensityMatrix:
        if program.n_spins != self.n_spins:
            raise SpinCountException(
                "Program size does not match active spins", program=program.n_spins, active=self.n_spins
            )
        for op in program.ops:
            rho = self.apply_pulse(rho, op)
        if program.final_frame:
            frame = frame_unitary(program)
            rho = rho.with_matrix(frame @ rho.matrix @ frame.conj().T)
        if program.relabeling is not None:
            permutation = relabeling_matrix(program.relabeling)
            rho = rho.with_matrix(permutation @ rho.matrix @ permutation.T)
        return rho


def apply_pulse(rho: DensityMatrix, op: PulseOp, molecule: MoleculeSpec, **modes) -> DensityMatrix:
    return SpinSimulator(molecule, **modes).apply_pulse(rho, op)


def run_program(rho: DensityMatrix, program: PulseProgram, molecule: MoleculeSpec, **modes) -> DensityMatrix:
    return SpinSimulator(molecule, **modes).run_program(rho, program)


def pseudo_pure_target(n_spins: int) -> DensityMatrix:
    """Deviation of |0...0><0...0|, i.e. the product of I^alpha on every spin."""
    matrix = np.zeros((2**n_spins, 2**n_spins), dtype=complex)
    matrix[0, 0] = 1.0
    return DensityMatrix.deviation_of(matrix)


def labeled_pseudo_pure_target(n_spins: int = 4) -> DensityMatrix:
    """I_0z times I^alpha on every other spin."""
    components = {0: "z"}
    components.update({p: "alpha" for p in range(1, n_spins)})
    return DensityMatrix(product_operator(n_spins, components).matrix, DensityKind.DEVIATION)


@dataclass(frozen=True)
class PreparationProgram:
    name: str
    n_spins: int
    steps: Tuple[PulseProgram, ...]
    target: DensityMatrix

    def flattened(self) -> PulseProgram:
        program = self.steps[0]
        for step in self.steps[1:]:
            program = program.concatenated(step)
        return program


@dataclass
class PreparationResult:
    state: DensityMatrix
    snapshots: List[DensityMatrix]
    scale: float
    residual: float

    def to_dict(self) -> Dict[str, float]:
        return {"scale": self.scale, "residual": self.residual}


def fit_to_target(rho: DensityMatrix, target: DensityMatrix) -> Tuple[float, float]:
    """Best scale a for rho ~ a*target and the relative residual |rho - a target| / |a target|."""
    norm = float(np.real(np.vdot(target.matrix, target.matrix)))
    scale = float(np.real(np.vdot(target.matrix, rho.matrix))) / norm
    if scale == 0.0:
        return 0.0, math.inf
    residual = np.linalg.norm(rho.matrix - scale * target.matrix) / np.linalg.norm(scale * target.matrix)
    return scale, float(residual)


def pseudo_pure_program(molecule: MoleculeSpec, literal_angles: bool = False) -> PreparationProgram:
    """
    Three-carbon pseudo-pure sequence; spins 1, 2, 3 are the active positions
    0, 1, 2. Step one tips spin 3 by arccos(1/4), which the tabulated 5pi/12
    rounds; literal_angles uses the rounded value.
    """
    if molecule.n_active != 3:
        raise SpinCountException("Three-spin preparation needs 3 active spins", n_active=molecule.n_active)
    couplings = molecule.active_couplings()
    j12, j23 = couplings[0, 1], couplings[1, 2]
    if j12 == 0.0 or j23 == 0.0:
        raise SimulationException("Preparation needs nonzero J12 and J23", j12=j12, j23=j23)
    pi = math.pi
    tip3 = 5 * pi / 12 if literal_angles else math.acos(0.25)
    steps = (
        PulseProgram(3, (PulseOp.y(1, pi / 3), PulseOp.y(2, tip3), PulseOp.gradient()), name="step 1"),
        PulseProgram(
            3,
            (
                PulseOp.x(0, pi / 2),
                PulseOp.delay(1 / (2 * j12), (0, 1)),
                PulseOp.y(0, -pi / 2),
                PulseOp.gradient(),
            ),
            name="step 2",
        ),
        PulseProgram(
            3,
            (
                PulseOp.x(1, pi / 4),
                PulseOp.delay(1 / (4 * j23), (1, 2)),
                PulseOp.x(0, pi),
                PulseOp.delay(1 / (4 * j23), (1, 2)),
                PulseOp.y(1, pi / 4),
                PulseOp.gradient(),
            ),
            name="step 3",
        ),
        PulseProgram(
            3,
            (
                PulseOp.x(0, pi / 4),
                PulseOp.delay(1 / (2 * j12), (0, 1)),
                PulseOp.y(0, pi / 4),
                PulseOp.gradient(),
            ),
            name="step 4",
        ),
    )
    return PreparationProgram("pseudo-pure 000", 3, steps, pseudo_pure_target(3))


def labeled_pseudo_pure_program(molecule: MoleculeSpec) -> PreparationProgram:
    """Observer-labelled sequence; observer at position 0, computational spins 1..3."""
    if molecule.n_active != 4:
        raise SpinCountException("Labelled preparation needs 4 active spins", n_active=molecule.n_active)
    couplings = molecule.active_couplings()
    pi = math.pi
    steps = [
        PulseProgram(
            4,
            (PulseOp.y(1, pi / 2), PulseOp.y(2, pi / 2), PulseOp.y(3, pi / 2), PulseOp.gradient()),
            first_label=0,
            name="step 1",
        )
    ]
    for k in (1, 2, 3):
        if couplings[0, k] == 0.0:
            raise SimulationException("Observer must couple to every computational spin", spin=k)
        steps.append(
            PulseProgram(
                4,
                (
                    PulseOp.y(0, -pi / 4),
                    PulseOp.delay(1 / (2 * couplings[0, k]), (0, k)),
                    PulseOp.x(0, pi / 4),
                    PulseOp.gradient(),
                ),
                first_label=0,
                name=f"step {k + 1}",
            )
        )
    return PreparationProgram("labelled pseudo-pure 0z 000", 4, tuple(steps), labeled_pseudo_pure_target(4))


def run_preparation(
    preparation: PreparationProgram,
    molecule: MoleculeSpec,
    strict_delays: bool = False,
    diagonal_gradient: bool = False,
    weighted: bool = False,
) -> PreparationResult:
    simulator = SpinSimulator(molecule, strict_delays=strict_delays, diagonal_gradient=diagonal_gradient)
    rho = thermal_state(molecule, weighted=weighted)
    snapshots = []
    for step in preparation.steps:
        rho = simulator.run_program(rho, step)
        snapshots.append(rho)
    scale, residual = fit_to_target(rho, preparation.target)
    if residual > settings.PREPARATION_TOLERANCE:
        logger.warning(
            "%s reached its target with relative residual %.3e", preparation.name, residual
        )
    else:
        logger.debug("%s reached its target (scale %.6f, residual %.3e)", preparation.name, scale, residual)
    return PreparationResult(rho, snapshots, scale, residual)


def prepare_pseudo_pure_3spin(molecule: MoleculeSpec, literal_angles: bool = False, **modes) -> DensityMatrix:
    return run_preparation(pseudo_pure_program(molecule, literal_angles), molecule, **modes).state


def prepare_labeled_pseudo_pure_4spin(molecule: MoleculeSpec, **modes) -> DensityMatrix:
    return run_preparation(labeled_pseudo_pure_program(molecule), molecule, **modes).state


def step_polarizations(rho: DensityMatrix) -> Sequence[float]:
    """Coefficient of each I_pz in a deviation matrix (Tr(rho I_pz) / Tr(I_pz^2))."""
    n = rho.n_spins
    norm = 2**n / 4
    return [
        float(np.real(np.trace(rho.matrix @ spin_operator(n, p, "z").matrix)) / norm) for p in range(n)
    ]
