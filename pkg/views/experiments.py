"""
Experiment Views
`run` reproduces the NMR experiments (and the plain period-finding pipeline)
from a validated RunConfig.
"""
import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from core.exceptions import QFTNMRException
from services import experiments
from services.experiments import ExperimentKind, RunConfig
from views.output import emit, fail

logger = logging.getLogger(__name__)

cli = typer.Typer()


@cli.command("run")
def run_command(
    experiment: Annotated[
        ExperimentKind, typer.Option("--experiment", "-e", help="Pipeline to run")
    ] = ExperimentKind.FULL_QFT_TOMOGRAPHY,
    r: Annotated[int, typer.Option("--r", help="Period of the prepared state")] = 2,
    x0: Annotated[int, typer.Option("--x0", help="Offset of the prepared state")] = 0,
    n_qubits: Annotated[int, typer.Option("--n", help="Computational qubits")] = 3,
    shots: Annotated[int, typer.Option("--shots")] = 0,
    seed: Annotated[int, typer.Option("--seed")] = 0,
    molecule: Annotated[
        Optional[Path], typer.Option("--molecule", envvar="MOLECULE_PATH", help="Molecule JSON")
    ] = None,
    out: Annotated[Optional[Path], typer.Option("--out", help="Directory for result files")] = None,
    strict_delays: Annotated[bool, typer.Option("--strict-delays")] = False,
    diagonal_gradient: Annotated[bool, typer.Option("--diagonal-gradient")] = False,
    baseline: Annotated[bool, typer.Option("--baseline", help="Skip Hadamards and QFT")] = False,
    reference_program: Annotated[
        bool, typer.Option("--reference-program", help="Use the published QFT pulse sequence")
    ] = False,
) -> None:
    """Run one experiment and print its JSON summary."""
    try:
        cfg = RunConfig.build(
            experiment=experiment,
            r=r,
            x0=x0,
            n_qubits=n_qubits,
            shots=shots,
            seed=seed,
            molecule_path=molecule,
            output_dir=out,
            strict_delays=strict_delays,
            diagonal_gradient=diagonal_gradient,
            baseline=baseline,
            use_reference_program=reference_program,
        )
        result = experiments.run(cfg)
    except QFTNMRException as e:
        fail(e, "run", out)
        return
    emit(result.summary, result.passed)
