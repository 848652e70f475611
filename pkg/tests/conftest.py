import os

# Must be set before config.settings is first imported
os.environ.setdefault("SETTINGS_MODULE", "config.settings.test")

import numpy as np
import pytest

from services.circuits import Gate, QuantumCircuit
from services.molecule import MoleculeSpec, default_molecule, observer_molecule
from services.qstate import DensityKind, DensityMatrix, StateVector


@pytest.fixture
def molecule() -> MoleculeSpec:
    """Alanine with the three carbons active (C', Ca, Cb)."""
    return default_molecule()


@pytest.fixture
def observer(molecule: MoleculeSpec) -> MoleculeSpec:
    return observer_molecule(molecule)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2025)


def random_state(rng: np.random.Generator, n_qubits: int) -> StateVector:
    values = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return StateVector.from_amplitudes(values, normalize=True)


def random_density(rng: np.random.Generator, n_qubits: int, rank: int = 2) -> DensityMatrix:
    dimension = 2**n_qubits
    vectors = rng.normal(size=(dimension, rank)) + 1j * rng.normal(size=(dimension, rank))
    matrix = vectors @ vectors.conj().T
    return DensityMatrix(matrix / np.trace(matrix), DensityKind.PHYSICAL)


def random_unitary(rng: np.random.Generator, dimension: int) -> np.ndarray:
    z = rng.normal(size=(dimension, dimension)) + 1j * rng.normal(size=(dimension, dimension))
    q, r = np.linalg.qr(z)
    return q @ np.diag(r.diagonal() / np.abs(r.diagonal()))


def random_circuit(rng: np.random.Generator, n_qubits: int, max_gates: int = 10) -> QuantumCircuit:
    """Up to max_gates Hadamard, controlled-R_d and swap gates on random qubits."""
    kinds = ["h"] if n_qubits == 1 else ["h", "cr", "swap"]
    gates = []
    for _ in range(int(rng.integers(1, max_gates + 1))):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "h":
            gates.append(Gate.hadamard(int(rng.integers(1, n_qubits + 1))))
            continue
        a, b = (int(q) + 1 for q in rng.choice(n_qubits, size=2, replace=False))
        if kind == "cr":
            gates.append(Gate.controlled_r(a, b, int(rng.integers(1, 5))))
        else:
            gates.append(Gate.swap(a, b))
    return QuantumCircuit(n_qubits, tuple(gates))
