from pathlib import Path

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

ENV_FILE_PATH = Path(__file__).parent.parent.parent / ".env"
DATA_DIR = Path(__file__).parent.parent.parent / "data"


class Settings(BaseSettings):
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Shipped default is the alanine spin system; MOLECULE_PATH in the
    # environment (or .env) points the CLI at another spec file
    MOLECULE_PATH: Path = DATA_DIR / "alanine.json"
    OUTPUT_DIR: Path = Path("results")
    LOG_DIR: Path = Path.home() / ".config" / "qftnmr" / "logs"

    # Dense matrices only: 2^MAX_QUBITS is the largest dimension built
    MAX_QUBITS: int = 12

    # Numerical tolerances
    NORM_TOLERANCE: float = 1e-12
    UNITARY_TOLERANCE: float = 1e-10
    EQUIVALENCE_TOLERANCE: float = 1e-8
    PREPARATION_TOLERANCE: float = 1e-6
    TOMOGRAPHY_TOLERANCE: float = 1e-8
    FREQUENCY_RESOLUTION_HZ: float = 1.0

    SCHEMA_VERSION: str = "1.0"

    model_config = SettingsConfigDict(env_file=ENV_FILE_PATH, env_file_encoding="utf-8", extra="allow")

    @field_validator("MAX_QUBITS")
    @classmethod
    def _cap_qubits(cls, value: int) -> int:
        if not 1 <= value <= 12:
            raise ValueError("MAX_QUBITS must lie in 1..12")
        return value

    @field_validator("LOG_LEVEL")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        return value.upper()
