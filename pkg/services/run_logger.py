"""
Run Logger Service
Keeps a rotating key=value record of experiment runs, pulse compilations and
period-finding estimates. Logs are stored under settings.LOG_DIR.
"""
import logging
from enum import Enum
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional

from config.settings import settings


class LogCategory(Enum):
    """Log categories for the different pipelines"""
    EXPERIMENTS = "experiments"
    COMPILER = "compiler"
    PERIOD_FINDING = "period_finding"


class RunLogger:
    """
    Centralized run logger for qftnmr.
    One rotating file per category, records written as key=value pairs.
    """

    _instance = None
    _initialized = False

    def __new__(cls):
        """Singleton pattern to ensure single logger instance"""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if RunLogger._initialized:
            return

        self.log_dir = Path(settings.LOG_DIR)
        self.log_dir.mkdir(parents=True, exist_ok=True)

        # 10MB per file, 5 backups
        self.max_bytes = 10 * 1024 * 1024
        self.backup_count = 5

        self.loggers: Dict[LogCategory, logging.Logger] = {
            category: self._create_logger(category) for category in LogCategory
        }
        RunLogger._initialized = True

    def _create_logger(self, category: LogCategory) -> logging.Logger:
        """
        Create a logger for a specific category with file handler.

        Args:
            category: The log category

        Returns:
            Configured logger instance
        """
        logger = logging.getLogger(f"qftnmr.runs.{category.value}")
        logger.setLevel(logging.INFO)

        # Prevent duplicate handlers
        if logger.handlers:
            return logger

        handler = RotatingFileHandler(
            self.get_log_file_path(category),
            maxBytes=self.max_bytes,
            backupCount=self.backup_count,
            encoding="utf-8",
        )
        handler.setFormatter(
            logging.Formatter("%(asctime)s [%(levelname)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
        )
        logger.addHandler(handler)
        logger.propagate = False
        return logger

    def _format_details(self, details: Dict[str, Any]) -> str:
        """
        Format details dictionary into a log string.

        Args:
            details: Dictionary of key-value pairs

        Returns:
            Formatted string like "key1=value1 key2=value2"
        """
        parts = []
        for key, value in details.items():
            if value is not None:
                str_value = str(value)
                if " " in str_value:
                    str_value = f'"{str_value}"'
                parts.append(f"{key}={str_value}")
        return " ".join(parts)

    def log_experiment(
        self,
        experiment: str,
        success: bool,
        seed: Optional[int] = None,
        r: Optional[int] = None,
        r_inferred: Optional[int] = None,
        error: Optional[str] = None,
    ) -> None:
        details = {
            "status": "SUCCESS" if success else "FAILED",
            "experiment": experiment,
            "seed": seed,
            "r": r,
            "r_inferred": r_inferred,
            "error": error,
        }
        log = self.loggers[LogCategory.EXPERIMENTS]
        (log.info if success else log.error)(self._format_details(details))

    def log_compilation(self, source: str, ops: int, fidelity: Optional[float] = None,
                        relabeling: Optional[str] = None) -> None:
        details = {"source": source, "ops": ops, "fidelity": fidelity, "relabeling": relabeling}
        self.loggers[LogCategory.COMPILER].info(self._format_details(details))

    def log_period_estimate(self, n: int, repetitions: int, seed: int, r_hat: int,
                            confidence: float, expected: Optional[int] = None) -> None:
        details = {
            "n": n,
            "repetitions": repetitions,
            "seed": seed,
            "r_hat": r_hat,
            "confidence": f"{confidence:.4f}",
            "expected": expected,
        }
        self.loggers[LogCategory.PERIOD_FINDING].info(self._format_details(details))

    def get_log_file_path(self, category: LogCategory) -> Path:
        return self.log_dir / f"{category.value}.log"

    def get_all_log_paths(self) -> Dict[str, Path]:
        return {category.value: self.get_log_file_path(category) for category in LogCategory}


# Create a global singleton instance
run_logger = RunLogger()
