"""
Pulse Compiler Views
`compile` lowers a circuit (default: the n-qubit QFT) to a pulse program,
prints it in the pulse grammar and checks it against the circuit unitary.
"""
import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from config.settings import settings
from core.exceptions import QFTNMRException
from services import pulse_compiler
from services.circuits import build_qft_circuit, logical_unitary, parse_circuit
from services.file import read_file, save_file, save_json
from services.pulse_compiler import HadamardVariant, assert_equivalent, program_unitary
from services.pulse_text import format_pulse_text
from services.run_logger import run_logger
from views.output import emit, fail

logger = logging.getLogger(__name__)

cli = typer.Typer()


@cli.command("compile")
def compile_command(
    circuit_file: Annotated[
        Optional[Path], typer.Option("--circuit", help="Circuit in the line-oriented text format")
    ] = None,
    n_qubits: Annotated[int, typer.Option("--n", help="QFT size when no circuit file is given")] = 3,
    keep_swaps: Annotated[bool, typer.Option("--keep-swaps", help="Expand swaps instead of relabeling")] = False,
    no_simplify: Annotated[bool, typer.Option("--no-simplify")] = False,
    variant: Annotated[HadamardVariant, typer.Option("--variant", help="Hadamard realisation")] = HadamardVariant.XY,
    reference: Annotated[bool, typer.Option("--reference", help="Check the published 3-qubit sequence")] = False,
    out: Annotated[Optional[Path], typer.Option("--out")] = None,
) -> None:
    """Compile a circuit to a pulse program and report unitary equivalence."""
    try:
        if reference:
            source = "reference"
            program = pulse_compiler.reference_qft_program()
            target = logical_unitary(build_qft_circuit(3))
        else:
            if circuit_file is not None:
                source = str(circuit_file)
                circuit = parse_circuit(read_file(circuit_file))
            else:
                source = f"qft{n_qubits}"
                circuit = build_qft_circuit(n_qubits, include_swaps=True)
            program = pulse_compiler.compile(circuit, elide_swaps=not keep_swaps, variant=variant)
            if not no_simplify:
                program = pulse_compiler.simplify(program)
            target = logical_unitary(circuit)
        report = assert_equivalent(program_unitary(program), target, settings.EQUIVALENCE_TOLERANCE)
    except QFTNMRException as e:
        fail(e, "compile", out)
        return

    text = format_pulse_text(program)
    summary = {
        "schema_version": settings.SCHEMA_VERSION,
        "source": source,
        "program": text,
        "ops": len(program),
        "equivalence": report.to_dict(),
        "passed": report.passed,
    }
    run_logger.log_compilation(
        source,
        len(program),
        fidelity=report.fidelity,
        relabeling=",".join(str(q) for q in program.relabeling) if program.relabeling else None,
    )
    if out is not None:
        save_file(Path(out) / "program.txt", text + "\n")
        save_json(Path(out) / "compile_summary.json", summary)
    emit(summary, report.passed)
