import tempfile
from pathlib import Path

from config.settings.base import Settings as BaseSettings

_TMP = Path(tempfile.gettempdir()) / "qftnmr-test"


class Settings(BaseSettings):
    OUTPUT_DIR: Path = _TMP / "results"
    LOG_DIR: Path = _TMP / "logs"
