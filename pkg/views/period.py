"""
Period Finding Views
"""
from pathlib import Path
from typing import Annotated, Optional

import typer

from core.exceptions import QFTNMRException
from services.experiments import ExperimentKind, RunConfig, run_period_finding_cli
from views.output import emit, fail

cli = typer.Typer()


@cli.command("period")
def period_command(
    table: Annotated[Optional[Path], typer.Option("--table", help="CSV with x,f(x) rows")] = None,
    n_qubits: Annotated[int, typer.Option("--n", help="Input register width")] = 3,
    r: Annotated[int, typer.Option("--r", help="Period of the generated function")] = 2,
    x0: Annotated[int, typer.Option("--x0", help="Shift of the generated function")] = 0,
    repetitions: Annotated[Optional[int], typer.Option("--repetitions", help="Defaults to 4n")] = None,
    seed: Annotated[int, typer.Option("--seed")] = 0,
    out: Annotated[Optional[Path], typer.Option("--out")] = None,
) -> None:
    """Estimate the period of a function table (or a generated periodic function)."""
    try:
        cfg = RunConfig.build(
            experiment=ExperimentKind.PERIOD_FINDING,
            function_table=table,
            n_qubits=n_qubits,
            r=r,
            x0=x0,
            repetitions=repetitions,
            seed=seed,
            output_dir=out,
        )
        result = run_period_finding_cli(cfg)
    except QFTNMRException as e:
        fail(e, "period", out)
        return
    emit(result.summary, result.passed)
