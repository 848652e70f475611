"""
Molecule Specification Service
Spin labels, chemical shifts and scalar couplings of the simulated molecule,
loaded from JSON. The order of the `active` list fixes the tensor-product
position of every spin in the Hilbert space.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from config.settings import settings
from core.exceptions import MoleculeSpecException

logger = logging.getLogger(__name__)

# Gyromagnetic ratios relative to 13C
GYROMAGNETIC_WEIGHTS: Dict[str, float] = {"13C": 1.0, "1H": 3.976, "15N": -0.403}

OBSERVER_ORDER = ("Ca", "C'", "Cb", "H")


class SpinSpec(BaseModel):
    label: str
    shift_hz: float
    nucleus: str = "13C"


class MoleculeSpec(BaseModel):
    name: str = ""
    spins: List[SpinSpec]
    couplings_hz: List[List[float]]
    active: List[str] = Field(default_factory=list)
    notes: str = ""

    model_config = {"extra": "ignore", "frozen": True}

    @model_validator(mode="after")
    def _check_consistency(self) -> "MoleculeSpec":
        labels = [spin.label for spin in self.spins]
        if len(set(labels)) != len(labels):
            raise ValueError("spin labels must be unique")
        couplings = np.asarray(self.couplings_hz, dtype=float)
        if couplings.shape != (len(labels), len(labels)):
            raise ValueError("couplings_hz must be a square matrix over all spins")
        if not np.allclose(couplings, couplings.T):
            raise ValueError("couplings_hz must be symmetric")
        if np.any(np.diag(couplings) != 0.0):
            raise ValueError("couplings_hz must have a zero diagonal")
        unknown = [label for label in self.active if label not in labels]
        if unknown:
            raise ValueError(f"active spins not declared: {unknown}")
        if len(set(self.active)) != len(self.active):
            raise ValueError("active spins must be unique")
        return self

    @property
    def labels(self) -> List[str]:
        return [spin.label for spin in self.spins]

    @property
    def active_labels(self) -> List[str]:
        return list(self.active) if self.active else self.labels

    @property
    def n_active(self) -> int:
        return len(self.active_labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise MoleculeSpecException("Unknown spin label", label=label)

    def position_of(self, label: str) -> int:
        """Hilbert-space position of an active spin."""
        try:
            return self.active_labels.index(label)
        except ValueError:
            raise MoleculeSpecException("Spin is not active", label=label, active=self.active_labels)

    def active_shifts(self) -> np.ndarray:
        return np.array([self.spins[self.index_of(label)].shift_hz for label in self.active_labels])

    def active_couplings(self) -> np.ndarray:
        indices = [self.index_of(label) for label in self.active_labels]
        couplings = np.asarray(self.couplings_hz, dtype=float)
        return couplings[np.ix_(indices, indices)]

    def active_weights(self) -> np.ndarray:
        return np.array(
            [
                GYROMAGNETIC_WEIGHTS.get(self.spins[self.index_of(label)].nucleus, 1.0)
                for label in self.active_labels
            ]
        )

    def coupling(self, label_a: str, label_b: str) -> float:
        return float(self.couplings_hz[self.index_of(label_a)][self.index_of(label_b)])

    def with_active(self, labels: Sequence[str]) -> "MoleculeSpec":
        return self.model_copy(update={"active": list(labels)})

    def with_coupling(self, label_a: str, label_b: str, value_hz: float) -> "MoleculeSpec":
        a, b = self.index_of(label_a), self.index_of(label_b)
        couplings = [list(row) for row in self.couplings_hz]
        couplings[a][b] = couplings[b][a] = float(value_hz)
        return self.model_copy(update={"couplings_hz": couplings})


def load_molecule(path: Optional[Path] = None) -> MoleculeSpec:
    """
    Load a molecule specification from JSON

    Args:
        path: Spec file; defaults to settings.MOLECULE_PATH

    Returns:
        Validated MoleculeSpec
    """
    path = Path(path or settings.MOLECULE_PATH)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise MoleculeSpecException("Molecule file not found", path=str(path))
    except json.JSONDecodeError as e:
        raise MoleculeSpecException("Molecule file is not valid JSON", path=str(path), error=str(e))
    try:
        molecule = MoleculeSpec.model_validate(payload)
    except ValidationError as e:
        raise MoleculeSpecException("Invalid molecule specification", path=str(path), error=str(e))
    logger.debug("Loaded molecule %r with active spins %s", molecule.name, molecule.active_labels)
    return molecule


def default_molecule() -> MoleculeSpec:
    return load_molecule(settings.MOLECULE_PATH)


def observer_molecule(molecule: MoleculeSpec) -> MoleculeSpec:
    """
    Four-spin ordering with Ca as observer spin 0 and C', Cb, H as spins 1..3.

    The methyl protons are CW decoupled from Cb, modelled by a zero Cb-H coupling.
    """
    return molecule.with_active(OBSERVER_ORDER).with_coupling("Cb", "H", 0.0)
