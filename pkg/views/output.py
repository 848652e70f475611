"""
Shared command output: JSON summaries on stdout, failure records, exit codes.
"""
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import typer
from rich.console import Console

from config.settings import settings
from core.exceptions import QFTNMRException
from services.file import dump_json, save_json

logger = logging.getLogger(__name__)

error_console = Console(stderr=True)


def emit(summary: Dict[str, Any], passed: bool = True) -> None:
    """Print the summary and exit nonzero when a pipeline check failed."""
    typer.echo(dump_json(summary), nl=False)
    if not passed:
        error_console.print("[bold red]Pipeline checks failed[/bold red]")
        raise typer.Exit(code=1)


def fail(error: QFTNMRException, command: str, out: Optional[Path] = None) -> None:
    """Print the error, write a machine-readable failure record and exit with code 2."""
    record = {
        "schema_version": settings.SCHEMA_VERSION,
        "command": command,
        "passed": False,
        "error": {
            "type": type(error).__name__,
            "message": error.message,
            "context": {key: str(value) for key, value in error.context.items()},
        },
    }
    logger.debug("%s failed: %s", command, error)
    error_console.print(f"[bold red]Error:[/bold red] {error}")
    if out is not None:
        save_json(Path(out) / f"{command}_failure.json", record)
    typer.echo(dump_json(record), nl=False)
    raise typer.Exit(code=2)
