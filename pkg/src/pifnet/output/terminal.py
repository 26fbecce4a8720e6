"""Rich terminal output formatting for pifnet."""

from rich import box
from rich.console import Console
from rich.table import Table

from ..core.models import CheckResult, FluidTrajectory, SimRecord, StabilityReport, Verdict


console = Console()

HEURISTIC_NOTE = "[dim]Heuristic diagnostic: thresholds are desk-scale choices, not derived limits.[/dim]"


def _vector(values) -> str:
    if values is None:
        return "-"
    return "(" + ", ".join(f"{v:.6g}" for v in values) + ")"


def _labels(indices) -> str:
    return "{" + ", ".join(str(i + 1) for i in indices) + "}"


def print_header(title: str):
    """Print a section header."""
    console.print()
    console.print(f"[bold blue]{title}[/bold blue]")
    console.print("=" * len(title))


def print_simulation(records: list[SimRecord]):
    """Print per-replica spike counts and final potentials."""
    print_header("SIMULATION")

    table = Table(box=box.ROUNDED)
    table.add_column("Replica", justify="right")
    table.add_column("Horizon", justify="right")
    table.add_column("Spikes", style="cyan")
    table.add_column("Final potentials")

    for record in records:
        table.add_row(
            str(record.replica),
            f"{record.horizon:.6g}",
            _vector(record.eta_final),
            _vector(record.z_final),
        )

    console.print(table)


def print_fluid(trajectory: FluidTrajectory):
    """Print the segments of a fluid path and its terminal status."""
    print_header("FLUID LIMIT")

    table = Table(box=box.ROUNDED)
    table.add_column("Start", justify="right")
    table.add_column("Active", style="cyan")
    table.add_column("phi")
    table.add_column("Slope")
    table.add_column("Rates", style="dim")

    for seg in trajectory.segments:
        table.add_row(
            f"{seg.start:.6g}",
            _labels(seg.active),
            _vector(seg.phi_start),
            _vector(seg.slope),
            _vector(seg.rates),
        )

    console.print(table)
    color = {"emptied-at": "green", "diverges": "red"}.get(trajectory.status.value, "yellow")
    line = f"\n  Status: [bold {color}]{trajectory.status.value}[/bold {color}] t={trajectory.status_time:.6g}"
    if trajectory.diverging:
        line += f"  neurons {_labels(trajectory.diverging)}"
    console.print(line)


def print_stability(report: StabilityReport):
    """Print steady rates and one row per subset condition."""
    print_header("STABILITY")

    console.print(f"\n  Steady rates: {_vector(report.rates)}")
    console.print(f"  Feasible: {'yes' if report.feasible else '[red]no[/red]'}")

    if report.subset_checks:
        table = Table(box=box.ROUNDED)
        table.add_column("Subset", style="cyan")
        table.add_column("a^S")
        table.add_column("Load", justify="right")
        table.add_column("Budget", justify="right")
        table.add_column("Pass")

        for check in report.subset_checks:
            load = "-" if check.load is None else f"{check.load:.6g}"
            mark = "[green]✓[/green]" if check.passed else "[red]✗[/red]"
            a = _vector(check.a) if check.invertible else "[dim]singular[/dim]"
            table.add_row(_labels(check.subset), a, load, f"{check.budget:.6g}", mark)

        console.print(table)

    if report.verdict == Verdict.STABLE:
        console.print("\n  Verdict: [bold green]stable[/bold green]")
    else:
        witness = f" (witness {_labels(report.witness)})" if report.witness else ""
        console.print(f"\n  Verdict: [bold yellow]partial-risk[/bold yellow]{witness}")
        console.print("  [dim]A failing subset means the sufficient condition fails, not proven instability.[/dim]")


def print_checks(results: list[CheckResult]):
    """Print the verification summary table."""
    print_header("VERIFICATION")

    table = Table(box=box.ROUNDED)
    table.add_column("Check", style="cyan")
    table.add_column("Statistic", justify="right")
    table.add_column("Threshold", justify="right")
    table.add_column("Replicas", justify="right")
    table.add_column("Result")

    for result in results:
        status = "[green]pass[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(
            result.name,
            f"{result.statistic:.6g}",
            f"{result.threshold:.6g}",
            str(result.replicas),
            status,
        )

    console.print(table)
    if any(r.details.get("heuristic") for r in results):
        console.print(HEURISTIC_NOTE)


def print_error(message: str):
    """Print error message."""
    console.print(f"[red]Error:[/red] {message}")


def print_success(message: str):
    """Print success message."""
    console.print(f"[green]✓[/green] {message}")


def print_warning(message: str):
    """Print warning message."""
    console.print(f"[yellow]⚠[/yellow] {message}")
