import logging
from typing import Annotated

import typer
from rich.console import Console
from rich.logging import RichHandler

from config.settings import settings
from views import router


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose or settings.DEBUG else settings.LOG_LEVEL
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=settings.DEBUG, show_path=False)],
        force=True,
    )


def create_app() -> typer.Typer:
    app = router

    @app.callback()
    def main_callback(
        verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")] = False,
    ) -> None:
        configure_logging(verbose)

    return app


app = create_app()


def main() -> None:
    app()


if __name__ == "__main__":
    main()
