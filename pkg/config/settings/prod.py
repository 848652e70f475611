import os
from pathlib import Path

from config.settings.base import Settings as BaseSettings

_STATE_HOME = Path(os.getenv("XDG_STATE_HOME", Path.home() / ".local" / "state"))


class Settings(BaseSettings):
    # --verbose on the CLI still switches to DEBUG
    LOG_LEVEL: str = "WARNING"
    LOG_DIR: Path = _STATE_HOME / "qftnmr" / "logs"
