"""Verification suites over seeded random worlds."""

from pathlib import Path

import typer
from rich.console import Console
from rich.table import Table

from idg_lab.cli import app, fail, usage_error
from idg_lab.config import get_settings, resolve_jobs, resolve_seed, write_manifest
from idg_lab.constants import EXIT_ASSERTION
from idg_lab.theory.suites import DEFAULT_SAMPLES, SuiteName, SuiteOptions, SuiteReport, run_suite
from idg_lab.utils.error_handler import IdgLabError
from idg_lab.utils.output import print_json, write_json


def _summary_table(reports: list[SuiteReport]) -> Table:
    table = Table(title="Verification")
    table.add_column("Suite", style="cyan")
    table.add_column("Passed", style="green")
    table.add_column("Failed", style="red")
    table.add_column("N/A", style="yellow")
    for report in reports:
        counts = report.counts()
        table.add_row(
            report.suite.value,
            str(counts["passed"]),
            str(counts["failed"]),
            str(counts["not_applicable"]),
        )
    return table


@app.command("verify")
def verify(
    suite: SuiteName = typer.Option(SuiteName.ALL, "--suite", help="Suite to run"),
    worlds: int = typer.Option(100, "--worlds", "-n", help="Number of random worlds"),
    seed: int | None = typer.Option(None, "--seed", "-s", help="Master seed"),
    budget: int | None = typer.Option(None, "--budget", help="Maximum encoders to enumerate"),
    samples: int = typer.Option(
        DEFAULT_SAMPLES, "--samples", help="Stochastic encoders per world (dpi suite)"
    ),
    jobs: int | None = typer.Option(None, "--jobs", "-j", help="Parallel workers"),
    allow_invalid: bool = typer.Option(
        False, "--allow-invalid", help="Draw assumption-violating worlds"
    ),
    output: Path | None = typer.Option(None, "--output", "-o", help="Write the JSON report here"),
    table: bool = typer.Option(False, "--table", "-t", help="Print a summary table"),
) -> None:
    """Run theorem and lemma checks on random worlds.

    Exits 0 when no world fails; not-applicable worlds do not count as failures.

    Example:
        idg-lab verify --suite theorem1 --worlds 100 --seed 7

        idg-lab verify --suite all --worlds 20 --jobs 4 -o report.json
    """
    if worlds < 1:
        raise usage_error(f"--worlds must be at least 1, got {worlds}")
    if samples < 1:
        raise usage_error(f"--samples must be at least 1, got {samples}")
    master = resolve_seed(seed)
    options = SuiteOptions(
        budget=budget if budget is not None else get_settings().enumeration_budget,
        samples=samples,
        allow_invalid=allow_invalid,
    )
    try:
        reports = run_suite(suite, worlds, master, options, jobs=resolve_jobs(jobs))
    except IdgLabError as e:
        raise fail(e)

    passed = all(r.passed for r in reports)
    payload = {
        "suite": suite.value,
        "seed": master,
        "passed": passed,
        "reports": [r.model_dump(mode="json") for r in reports],
    }
    if output is not None:
        write_json(output, payload)
        write_manifest(
            output.parent,
            "verify",
            {
                "suite": suite.value,
                "worlds": worlds,
                "budget": options.budget,
                "samples": samples,
                "allow_invalid": allow_invalid,
                "output": output,
            },
            master,
        )
    if table:
        Console().print(_summary_table(reports))
    elif output is None:
        print_json(payload)

    if not passed:
        typer.secho("Verification failed", fg=typer.colors.RED)
        raise typer.Exit(EXIT_ASSERTION)
