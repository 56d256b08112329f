import logging
import sys
from pathlib import Path
from typing import Optional

import click
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from pulsegen.application.compiler import PulseCompiler
from pulsegen.application.sweep import fidelity_sweep
from pulsegen.catalog.problems import DEFAULT_DELTA, DEFAULT_J, catalog_problem, list_problems
from pulsegen.utils.config import load_ga_config, log_level
from pulsegen.utils.errors import SequenceSchemaError
from pulsegen.utils.objects import SweepGrid
from pulsegen.utils.utils import (
    first_error_field,
    parse_angle_list,
    parse_float_list,
    write_sweep_csv,
)

# Configure logging
logging.basicConfig(
    level=log_level(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler(sys.stdout)]
)

logger = logging.getLogger(__name__)

app = typer.Typer(help="Genetic-algorithm pulse-sequence compiler for weakly coupled spin pairs")
console = Console()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SHORTFALL = 2


def fail(message: str) -> None:
    console.print(f"[red]{message}[/red]")
    raise typer.Exit(EXIT_USAGE)


def describe_error(err: Exception) -> str:
    if isinstance(err, ValidationError):
        first = err.errors()[0]
        return f"{first_error_field(err)}: {first.get('msg', 'invalid value')}"
    return str(err)


def require(value, flag: str) -> None:
    if value is None:
        fail(f"{flag.lstrip('-')}: {flag} is required")


@app.command()
def optimize(
    problem: Optional[str] = typer.Option(None, "--problem", help="Catalogue problem, see `problems`"),
    delta: float = typer.Option(DEFAULT_DELTA, "--delta", help="Chemical shift offset in Hz"),
    j: float = typer.Option(DEFAULT_J, "--j", help="J coupling in Hz"),
    config: Optional[Path] = typer.Option(None, "--config", help="key=value GA settings file"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master RNG seed (u64)"),
    out: Path = typer.Option(Path("out"), "--out", help="Output directory"),
    cutoff: Optional[float] = typer.Option(None, "--cutoff"),
    generations: Optional[int] = typer.Option(None, "--generations"),
    population: Optional[int] = typer.Option(None, "--population"),
    final_crusher: bool = typer.Option(False, "--final-crusher", help="Crush before scoring (Bell only)"),
    via_sqr: bool = typer.Option(
        False, "--via-sqr", help="pps01/pps10/pps11: optimize pps00, then append selective pi pulses"
    ),
) -> None:
    """
    Search a pulse sequence for a catalogue problem and write sequence, report and history
    """
    require(problem, "--problem")
    try:
        ga_config = load_ga_config(
            config,
            {"rng_seed": seed, "cutoff": cutoff, "generations": generations, "population_size": population},
        )
        compiler = PulseCompiler(ga_config)
        compiler.build_problem(problem, delta, j, final_crusher, via_sqr)
    except ValueError as e:
        fail(describe_error(e))

    console.print(f"[cyan]Optimizing {problem} at delta={delta} Hz, J={j} Hz[/cyan]")
    outcome = compiler.compile(problem, delta, j, out, final_crusher, via_sqr)
    report = outcome.report

    table = Table(title=f"{problem} ({report.kind})")
    table.add_column("field")
    table.add_column("value")
    table.add_row("seed", str(report.seed))
    table.add_row("best fidelity", repr(report.best_fidelity))
    table.add_row("converged", str(report.converged))
    table.add_row("genes", f"{report.genes_before} -> {report.genes_after}")
    table.add_row("generations", str(report.history.generations_run))
    table.add_row("wall time", f"{report.wall_time_s:.2f} s")
    console.print(table)
    for path in outcome.files:
        console.print(f"[green]Wrote {path}[/green]")

    if not report.converged:
        console.print(f"[yellow]Cutoff {report.config.cutoff} not reached[/yellow]")
        raise typer.Exit(EXIT_SHORTFALL)


@app.command()
def verify(
    sequence: Optional[Path] = typer.Option(None, "--sequence", help="Sequence JSON file"),
    problem: Optional[str] = typer.Option(None, "--problem"),
    tolerance: float = typer.Option(0.99, "--tolerance", help="Minimum fidelity to pass"),
    delta: float = typer.Option(DEFAULT_DELTA, "--delta"),
    j: float = typer.Option(DEFAULT_J, "--j"),
    final_crusher: bool = typer.Option(False, "--final-crusher"),
) -> None:
    """
    Re-simulate a sequence file and report its fidelity
    """
    require(sequence, "--sequence")
    require(problem, "--problem")
    try:
        result = PulseCompiler().verify(sequence, problem, delta, j, final_crusher)
    except SequenceSchemaError as e:
        fail(f"invalid sequence file: {e}")
    except ValueError as e:
        fail(describe_error(e))

    console.print(f"[green]fidelity: {result.fidelity!r}[/green]")
    if result.populations is not None:
        table = Table(title="diagonal populations")
        for state in ("|00>", "|01>", "|10>", "|11>"):
            table.add_column(state)
        table.add_row(*(f"{p:.6f}" for p in result.populations))
        console.print(table)
        console.print(f"transfer efficiency: {result.transfer_efficiency:.6f}")

    if result.fidelity < tolerance:
        console.print(f"[yellow]fidelity below tolerance {tolerance}[/yellow]")
        raise typer.Exit(EXIT_SHORTFALL)


@app.command()
def sweep(
    family: Optional[str] = typer.Option(None, "--family", help="sqr, cnot or pps"),
    ratios: Optional[str] = typer.Option(None, "--ratios", help="J/delta list, '0,0.05' or '0:0.1:11'"),
    thetas: Optional[str] = typer.Option(None, "--thetas", help="Flip angles for sqr, e.g. 'pi/4,pi/2'"),
    delta: float = typer.Option(500.0, "--delta", help="Reference chemical shift offset in Hz"),
    solver: str = typer.Option("template", "--solver", help="template or ga"),
    member: Optional[str] = typer.Option(None, "--member", help="Problem of the family, e.g. cnot21"),
    config: Optional[Path] = typer.Option(None, "--config"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Path = typer.Option(Path("sweep.csv"), "--out"),
) -> None:
    """
    Fidelity versus J/delta for a problem family, written as CSV
    """
    require(family, "--family")
    try:
        grid_args = {"delta": delta}
        parsed_ratios = parse_float_list(ratios)
        parsed_thetas = parse_angle_list(thetas)
        if parsed_ratios is not None:
            grid_args["ratios"] = parsed_ratios
        if parsed_thetas is not None:
            grid_args["thetas"] = parsed_thetas
        grid = SweepGrid(**grid_args)
        ga_config = load_ga_config(config, {"rng_seed": seed})
        console.print(f"[cyan]Sweeping {family} over {len(grid.ratios)} ratios[/cyan]")
        rows = fidelity_sweep(family, grid, solver, ga_config, member)
    except ValueError as e:
        fail(describe_error(e))

    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out, rows, with_theta=family == "sqr")

    table = Table(title=f"{family} sweep")
    table.add_column("J/delta")
    if family == "sqr":
        table.add_column("theta")
    table.add_column("fidelity")
    table.add_column("converged")
    for row in rows:
        cells = [f"{row.j_over_delta:g}"]
        if family == "sqr":
            cells.append(f"{row.theta:.4f}")
        cells += [f"{row.fidelity:.6f}", str(row.converged)]
        table.add_row(*cells)
    console.print(table)
    console.print(f"[green]Wrote {out}[/green]")

    if not all(row.converged for row in rows):
        raise typer.Exit(EXIT_SHORTFALL)


@app.command()
def problems() -> None:
    """
    List the catalogue problems
    """
    table = Table(title="problems")
    table.add_column("name")
    table.add_column("kind")
    table.add_column("genes")
    table.add_column("template")
    for name in list_problems():
        problem = catalog_problem(name)
        template = problem.template
        table.add_row(
            name,
            problem.kind,
            str(template.m) if template else "3..12",
            template.summary() if template else "free",
        )
    console.print(table)


def main() -> None:
    """Console entry point; maps click usage errors to exit code 1."""
    try:
        code = app(standalone_mode=False)
    except click.exceptions.UsageError as e:
        console.print(f"[red]{e.format_message()}[/red]")
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    sys.exit(code or EXIT_OK)


if __name__ == "__main__":
    main()
