import typer

import views.compile
import views.experiments
import views.period


router = typer.Typer(no_args_is_help=True, help="QFT period finding on a simulated NMR quantum computer.")

# Each view module owns a sub-application; its commands are mounted at the top level
for module in (views.experiments, views.compile, views.period):
    router.registered_commands.extend(module.cli.registered_commands)
