"""
Settings selection for the qftnmr toolkit.

SETTINGS_MODULE names one of config.settings.{dev,prod,test}; the CLI runs
with prod unless told otherwise, and tests/conftest.py selects test before
the first import. Values may be overridden per field through the environment
or the project's .env file.
"""
import os
import pathlib
from importlib import import_module

from pydantic import ValidationError

from config.settings.base import Settings
from core.exceptions import ConfigurationException

BASE_DIR = pathlib.Path(__file__).resolve().parent.parent.parent
DEFAULT_SETTINGS_MODULE = "config.settings.prod"


def get_settings(module: str = "") -> Settings:
    settings_module = module or os.getenv("SETTINGS_MODULE", DEFAULT_SETTINGS_MODULE)
    try:
        settings_class = import_module(settings_module).Settings
    except (ImportError, AttributeError) as e:
        raise ConfigurationException(
            "Unknown settings module", module=settings_module, error=str(e)
        ) from e
    try:
        return settings_class()
    except ValidationError as e:
        raise ConfigurationException(
            "Invalid settings", module=settings_module, errors=e.error_count()
        ) from e


settings = get_settings()
