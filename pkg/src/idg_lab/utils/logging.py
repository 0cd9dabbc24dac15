"""Logging configuration for idg-lab."""

import logging

from rich.console import Console
from rich.logging import RichHandler


def setup_logging(
    verbose: bool = False, debug: bool = False, default_level: str = "WARNING"
) -> logging.Logger:
    """Configure logging with rich output.

    Args:
        verbose: Enable INFO level logging
        debug: Enable DEBUG level logging
        default_level: Level name used when neither flag is set

    Returns:
        Configured logger instance
    """
    if debug:
        level = logging.DEBUG
    elif verbose:
        level = logging.INFO
    else:
        level = logging.getLevelName(default_level.upper())
        if not isinstance(level, int):
            level = logging.WARNING

    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[
            RichHandler(
                console=Console(stderr=True),
                rich_tracebacks=True,
                show_time=True,
                show_path=debug,
                markup=False,
                tracebacks_show_locals=debug,
            )
        ],
        force=True,
    )

    logger = logging.getLogger("idg_lab")
    logger.setLevel(level)

    # Suppress pandas' numexpr chatter unless debug mode
    if not debug:
        logging.getLogger("numexpr").setLevel(logging.WARNING)

    return logger


def get_logger(name: str | None = None) -> logging.Logger:
    """Get a logger instance.

    Args:
        name: Logger name (defaults to 'idg_lab')

    Returns:
        Logger instance
    """
    if name:
        return logging.getLogger(f"idg_lab.{name}")
    return logging.getLogger("idg_lab")
