"""Main CLI application for idg-lab."""

import sys
from pathlib import Path

import typer

try:  # typer >= 0.26 vendors its own click; its exceptions are distinct classes
    from typer._click import exceptions as click
except ImportError:  # pragma: no cover
    import click  # type: ignore[no-redef]

from idg_lab.config import get_settings, load_config_file
from idg_lab.constants import EXIT_ASSERTION, EXIT_USAGE
from idg_lab.utils.error_handler import IdgLabError
from idg_lab.utils.logging import setup_logging

app = typer.Typer(
    name="idg-lab",
    help="Exact laboratory for idealized domain generalization",
    add_completion=False,
)

# Command groups
experiment_app = typer.Typer(help="Run the sweep, regime and target-access experiments")

app.add_typer(experiment_app, name="experiment")


def fail(e: IdgLabError) -> typer.Exit:
    """Print a library error and build the matching exit."""
    typer.secho(f"Error: {e}", fg=typer.colors.RED)
    return typer.Exit(e.exit_code)


def usage_error(message: str) -> typer.Exit:
    typer.secho(f"Error: {message}", fg=typer.colors.RED)
    return typer.Exit(EXIT_USAGE)


@app.callback()
def main_callback(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
    debug: bool = typer.Option(False, "--debug", "-d", help="Enable debug logging"),
    config: Path | None = typer.Option(
        None, "--config", help="TOML file with per-command option defaults"
    ),
) -> None:
    """idg-lab - exact IDG risks, theorem oracles and bottlenecked encoder training."""
    setup_logging(verbose=verbose, debug=debug, default_level=get_settings().log_level)
    if config is not None:
        try:
            ctx.default_map = load_config_file(config)
        except IdgLabError as e:
            raise fail(e)


@app.command()
def version() -> None:
    """Show version information."""
    from idg_lab import __version__

    typer.echo(f"idg-lab version {__version__}")


def main() -> None:
    """Main entry point; click usage errors exit with the usage code."""
    try:
        code = app(standalone_mode=False)
    except click.UsageError as e:
        e.show()
        sys.exit(EXIT_USAGE)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except click.Abort:
        sys.exit(EXIT_ASSERTION)
    sys.exit(code if isinstance(code, int) else 0)


if __name__ == "__main__":
    main()


# Import command modules to register commands (after all functions are defined)
from idg_lab.commands import data, experiment, probe, train, verify  # noqa: F401, E402
