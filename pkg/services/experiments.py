"""
Experiment Service
End-to-end pipelines: full QFT with tomographic readout on three carbons,
semiclassical QFT with observer-spin spectral readout, and period finding.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError, model_validator

from config.settings import settings
from core.exceptions import InvalidConfigurationException, QFTNMRException
from services.circuits import (
    apply_qft,
    build_qft_circuit,
    dephase_qubit,
    qft_matrix,
    sample_semiclassical_qft,
)
from services.file import save_csv, save_json
from services.molecule import load_molecule, observer_molecule
from services.period_finding import (
    PeriodEstimate,
    classical_period_oracle,
    coprime_bound_report,
    load_function_table,
    periodic_function,
    prepare_periodic_state,
    run_period_finding,
)
from services.pulse_compiler import (
    PulseOp,
    PulseProgram,
    assert_equivalent,
    compile,
    conditional_phase_sequence,
    hadamard_sequence,
    program_unitary,
    reference_qft_program,
    simplify,
)
from services.pulse_text import format_pulse_text
from services.qstate import (
    DensityKind,
    DensityMatrix,
    StateVector,
    embed,
    measure_distribution,
    sample,
)
from services.readout import (
    attenuated_correlation,
    decode_observer_readout,
    infer_period_from_states,
    synthesize_spectrum,
    tomograph,
)
from services.run_logger import run_logger
from services.spin_simulator import (
    SpinSimulator,
    fit_to_target,
    labeled_pseudo_pure_program,
    pseudo_pure_program,
    run_preparation,
)
from services.utils import bitstring

logger = logging.getLogger(__name__)

SPECTRUM_FIELDS = ("spin", "frequency_hz", "amplitude", "assignment")
SUPPORT_THRESHOLD = 1e-6


class ExperimentKind(str, Enum):
    FULL_QFT_TOMOGRAPHY = "full_qft_tomography"
    OBSERVER_SPECTRAL = "observer_spectral"
    PERIOD_FINDING = "period_finding"


class RunConfig(BaseModel):
    """Validated settings of one CLI run; defaults reproduce the three-qubit r = 2 case."""

    experiment: ExperimentKind = ExperimentKind.FULL_QFT_TOMOGRAPHY
    molecule_path: Path = settings.MOLECULE_PATH
    n_qubits: int = 3
    r: int = 2
    x0: int = 0
    shots: int = 0
    seed: int = 0
    repetitions: Optional[int] = None
    function_table: Optional[Path] = None
    output_dir: Optional[Path] = None
    strict_delays: bool = False
    diagonal_gradient: bool = False
    baseline: bool = False
    use_reference_program: bool = False

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if not 1 <= self.n_qubits <= settings.MAX_QUBITS:
            raise ValueError(f"n_qubits must lie in 1..{settings.MAX_QUBITS}")
        size = 2**self.n_qubits
        if self.function_table is None:
            if not 1 <= self.r <= size:
                raise ValueError("r must lie in 1..2^n_qubits")
            if not 0 <= self.x0 < self.r:
                raise ValueError("x0 must lie in 0..r-1")
        if self.experiment is not ExperimentKind.PERIOD_FINDING:
            if self.n_qubits != 3:
                raise ValueError("the NMR experiments run on three computational spins")
            if size % self.r:
                raise ValueError("the NMR experiments need r dividing 2^n_qubits")
        if self.shots < 0 or self.seed < 0:
            raise ValueError("shots and seed must be nonnegative")
        if self.repetitions is not None and self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        return self

    @classmethod
    def build(cls, **values: Any) -> "RunConfig":
        try:
            return cls(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            raise InvalidConfigurationException("Invalid run configuration", errors=e.errors(include_url=False))

    def public_dict(self) -> Dict[str, Any]:
        """Config fields that shape the result (paths excluded for reproducible summaries)."""
        return self.model_dump(mode="json", exclude={"molecule_path", "output_dir", "function_table"})


@dataclass
class ExperimentResult:
    summary: Dict[str, Any]
    passed: bool
    files: Dict[str, Path] = field(default_factory=dict)


def periodic_state_program(n_spins: int, qubits: Sequence[int], r: int, x0: int = 0,
                           first_label: int = 1) -> PulseProgram:
    """
    Pulses taking |0...0> on the given spin positions to the equal superposition
    of x0 + j r: Hadamards on the high qubits, inversions where x0 has a 1 bit.
    """
    n = len(qubits)
    size = 2**n
    if size % r:
        raise InvalidConfigurationException("Pulse preparation needs r dividing 2^n", r=r, n=n)
    low_bits = int(math.log2(r))
    ops: List[PulseOp] = []
    for index, position in enumerate(qubits):
        if index < n - low_bits:
            ops.extend(hadamard_sequence(position))
        elif (x0 >> (n - 1 - index)) & 1:
            ops.append(PulseOp.x(position, math.pi))
    return PulseProgram(n_spins, tuple(ops), first_label=first_label, name=f"periodic r={r} x0={x0}")


def qft_program(use_reference: bool = False) -> PulseProgram:
    if use_reference:
        return reference_qft_program()
    return simplify(compile(build_qft_circuit(3, include_swaps=True), elide_swaps=True))


def support_from_populations(populations: np.ndarray, threshold: float = SUPPORT_THRESHOLD) -> List[int]:
    return [int(i) for i in np.flatnonzero(populations > threshold)]


def _spectrum_rows(spectra) -> List[Dict[str, Any]]:
    rows = []
    for spectrum in spectra:
        for row in spectrum.rows():
            rows.append({"spin": spectrum.label, **row})
    return rows


def _write_outputs(cfg: RunConfig, stem: str, summary: Dict[str, Any],
                   spectrum_rows: List[Dict[str, Any]], extra: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
    if cfg.output_dir is None:
        return {}
    directory = Path(cfg.output_dir)
    files = {
        "summary": save_json(directory / f"{stem}_summary.json", summary),
        "spectrum": save_csv(directory / f"{stem}_spectrum.csv", spectrum_rows, SPECTRUM_FIELDS),
    }
    for name, payload in (extra or {}).items():
        files[name] = save_json(directory / f"{stem}_{name}.json", payload)
    return files


def run_experiment_1(cfg: RunConfig) -> ExperimentResult:
    """
    Three-carbon pipeline: pseudo-pure preparation, Hadamards for the chosen
    period, the compiled QFT program, tomography, correlation against the
    ideal output and period inference from the reconstructed populations.
    """
    molecule = load_molecule(cfg.molecule_path)
    n = molecule.n_active
    modes = {"strict_delays": cfg.strict_delays, "diagonal_gradient": cfg.diagonal_gradient}
    simulator = SpinSimulator(molecule, **modes)

    preparation = run_preparation(pseudo_pure_program(molecule), molecule, **modes)
    rho = simulator.run_program(preparation.state, periodic_state_program(n, range(n), cfg.r, cfg.x0))

    program = qft_program(cfg.use_reference_program)
    equivalence = assert_equivalent(program_unitary(program), qft_matrix(n))
    rho_exp = simulator.run_program(rho, program)

    ideal_state = apply_qft(prepare_periodic_state(n, cfg.r, cfg.x0))
    rho_th = DensityMatrix.deviation_of(np.outer(ideal_state.amplitudes, ideal_state.amplitudes.conj()))

    tomogram = tomograph(rho_exp, molecule)
    correlation = attenuated_correlation(rho_th, tomogram.reconstructed)
    scale, _ = fit_to_target(tomogram.reconstructed, rho_th)
    populations = np.real(np.diag(tomogram.reconstructed.matrix)) / preparation.scale + 1 / 2**n
    support = support_from_populations(populations)
    k, r_inferred = infer_period_from_states(support, n)

    spectra = [synthesize_spectrum(rho_exp, p, molecule) for p in range(n)]
    passed = (
        equivalence.passed
        and preparation.residual <= settings.PREPARATION_TOLERANCE
        and tomogram.residual <= settings.TOMOGRAPHY_TOLERANCE
        and abs(correlation - 1.0) <= settings.PREPARATION_TOLERANCE
        and r_inferred == cfg.r
    )
    summary = {
        "schema_version": settings.SCHEMA_VERSION,
        "experiment": ExperimentKind.FULL_QFT_TOMOGRAPHY.value,
        "config": cfg.public_dict(),
        "preparation": preparation.to_dict(),
        "qft_program": format_pulse_text(program),
        "qft_ops": len(program),
        "equivalence": equivalence.to_dict(),
        "tomography_residual": tomogram.residual,
        "correlation": correlation,
        "scale": scale,
        "support": [bitstring(i, n) for i in support],
        "k": k,
        "r_inferred": r_inferred,
        "passed": passed,
    }
    files = _write_outputs(cfg, "experiment1", summary, _spectrum_rows(spectra), {"tomogram": tomogram.to_dict()})
    run_logger.log_experiment("experiment1", passed, seed=cfg.seed, r=cfg.r, r_inferred=r_inferred)
    logger.info("Experiment 1 (r=%d): support %s, k=%d, r=%d", cfg.r, summary["support"], k, r_inferred)
    return ExperimentResult(summary, passed, files)


def _project(matrix: np.ndarray, projector: np.ndarray) -> np.ndarray:
    return projector @ matrix @ projector


def apply_semiclassical_qft(simulator: SpinSimulator, rho: DensityMatrix, spins: Sequence[int]) -> DensityMatrix:
    """
    Ensemble semiclassical QFT on the given spin positions (qubit 1 first).

    Each conditioned rotation runs as a single-spin frame rotation inside the
    branch selected by the earlier, already dephased, qubits; each measurement
    becomes dephasing of the measured spin. Only single-spin pulses are used.
    """
    n_total = rho.n_spins
    alpha = np.diag([1.0, 0.0]).astype(complex)
    beta = np.diag([0.0, 1.0]).astype(complex)
    for j, spin in enumerate(spins):
        earlier = list(spins[:j])
        if earlier:
            matrix = np.zeros_like(rho.matrix)
            for branch in product((0, 1), repeat=len(earlier)):
                projector = np.eye(2**n_total, dtype=complex)
                for position, bit in zip(earlier, branch):
                    projector = embed(beta if bit else alpha, [position], n_total) @ projector
                branch_rho = rho.with_matrix(_project(rho.matrix, projector))
                for k, bit in enumerate(branch):
                    if bit:
                        for op in conditional_phase_sequence(spin, j - k):
                            branch_rho = simulator.apply_pulse(branch_rho, op)
                matrix = matrix + branch_rho.matrix
            rho = rho.with_matrix(matrix)
        for op in hadamard_sequence(spin):
            rho = simulator.apply_pulse(rho, op)
        rho = rho.with_matrix(dephase_qubit(rho.matrix, spin, n_total))
    return rho


def _shot_statistics(cfg: RunConfig, n: int, populations: np.ndarray) -> Tuple[Dict[str, int], bool]:
    """
    Single-molecule counterpart of the ensemble readout: cfg.shots runs of the
    measured semiclassical QFT on the periodic register, counted per outcome.
    """
    if cfg.shots == 0:
        return {}, True
    if cfg.baseline:
        outcomes = sample(StateVector.basis(0, n), cfg.seed, cfg.shots)
    else:
        outcomes = sample_semiclassical_qft(prepare_periodic_state(n, cfg.r, cfg.x0), cfg.shots, cfg.seed)
    counts = Counter(bitstring(outcome, n) for outcome in outcomes)
    support = set(support_from_populations(populations))
    return dict(sorted(counts.items())), all(outcome in support for outcome in outcomes)


def run_experiment_2(cfg: RunConfig) -> ExperimentResult:
    """
    Observer pipeline: labelled pseudo-pure preparation, Hadamards on the
    computational spins, ensemble semiclassical QFT, observer spectrum,
    decoding and period inference.
    """
    molecule = observer_molecule(load_molecule(cfg.molecule_path))
    modes = {"strict_delays": cfg.strict_delays, "diagonal_gradient": cfg.diagonal_gradient}
    simulator = SpinSimulator(molecule, **modes)
    computational = [1, 2, 3]
    n = len(computational)

    preparation = run_preparation(labeled_pseudo_pure_program(molecule), molecule, **modes)
    rho = preparation.state
    if cfg.baseline:
        ideal_populations = np.zeros(2**n)
        ideal_populations[0] = 1.0
    else:
        rho = simulator.run_program(
            rho, periodic_state_program(4, computational, cfg.r, cfg.x0, first_label=0)
        )
        rho = apply_semiclassical_qft(simulator, rho, computational)
        # measured bits come out in reverse significance: exchange spins 1 and 3
        rho = simulator.run_program(rho, PulseProgram(4, (), relabeling=(0, 3, 2, 1), first_label=0))
        ideal_populations = measure_distribution(apply_qft(prepare_periodic_state(n, cfg.r, cfg.x0)))

    observer_z = np.diag([0.5, -0.5]).astype(complex)
    rho_th = DensityMatrix(np.kron(observer_z, np.diag(ideal_populations)), DensityKind.DEVIATION)
    correlation = attenuated_correlation(rho_th, rho)

    spectrum = synthesize_spectrum(rho, 0, molecule)
    decoded = decode_observer_readout(spectrum, observer=0)
    states = [state for state, _ in decoded]
    k, r_inferred = infer_period_from_states(states, n)
    expected_r = 1 if cfg.baseline else cfg.r
    shot_counts, shots_in_support = _shot_statistics(cfg, n, ideal_populations)

    passed = (
        preparation.residual <= settings.PREPARATION_TOLERANCE
        and abs(correlation - 1.0) <= settings.PREPARATION_TOLERANCE
        and (cfg.baseline or r_inferred == expected_r)
        and shots_in_support
    )
    summary = {
        "schema_version": settings.SCHEMA_VERSION,
        "experiment": ExperimentKind.OBSERVER_SPECTRAL.value,
        "config": cfg.public_dict(),
        "preparation": preparation.to_dict(),
        "decoded": [{"state": state, "amplitude": amplitude} for state, amplitude in decoded],
        "states": sorted(states),
        "correlation": correlation,
        "k": k,
        "r_inferred": r_inferred,
        "shot_counts": shot_counts,
        "passed": passed,
    }
    files = _write_outputs(cfg, "experiment2", summary, _spectrum_rows([spectrum]))
    run_logger.log_experiment("experiment2", passed, seed=cfg.seed, r=cfg.r, r_inferred=r_inferred)
    logger.info("Experiment 2 (r=%d): decoded %s, r=%d", cfg.r, summary["states"], r_inferred)
    return ExperimentResult(summary, passed, files)


def run_period_finding_cli(cfg: RunConfig) -> ExperimentResult:
    """Period finding on a CSV function table or on f(x) = (x + x0) mod r."""
    if cfg.function_table is not None:
        function = load_function_table(cfg.function_table)
    else:
        function = periodic_function(cfg.n_qubits, cfg.r, [(i + cfg.x0) % cfg.r for i in range(cfg.r)])
    n = function.n_in
    repetitions = cfg.repetitions or 4 * n
    estimate: PeriodEstimate = run_period_finding(function, repetitions, cfg.seed)
    # the classical answer only grades the run
    expected = classical_period_oracle(function)
    passed = estimate.r_hat == expected
    summary = {
        "schema_version": settings.SCHEMA_VERSION,
        "experiment": ExperimentKind.PERIOD_FINDING.value,
        "config": cfg.public_dict(),
        "n": n,
        "estimate": estimate.to_dict(),
        "classical_period": expected,
        "bounds": coprime_bound_report(expected),
        "passed": passed,
    }
    files = {}
    if cfg.output_dir is not None:
        files["summary"] = save_json(Path(cfg.output_dir) / "period_finding_summary.json", summary)
    run_logger.log_period_estimate(n, repetitions, cfg.seed, estimate.r_hat, estimate.confidence, expected)
    return ExperimentResult(summary, passed, files)


RUNNERS = {
    ExperimentKind.FULL_QFT_TOMOGRAPHY: run_experiment_1,
    ExperimentKind.OBSERVER_SPECTRAL: run_experiment_2,
    ExperimentKind.PERIOD_FINDING: run_period_finding_cli,
}


def run(cfg: RunConfig) -> ExperimentResult:
    try:
        return RUNNERS[cfg.experiment](cfg)
    except QFTNMRException as e:
        run_logger.log_experiment(cfg.experiment.value, False, seed=cfg.seed, r=cfg.r, error=str(e))
        raise
