"""Bounded retry of rejection samplers for idg-lab."""

import logging
from collections.abc import Callable
from typing import TypeVar

from tenacity import (
    RetryError,
    Retrying,
    after_log,
    retry_if_exception_type,
    stop_after_attempt,
)

from idg_lab.constants import MAX_REJECTIONS
from idg_lab.utils.error_handler import UnsatisfiableConstraintError

logger = logging.getLogger("idg_lab.retry")

T = TypeVar("T")


class RejectedSample(Exception):
    """Raised by a draw function whose sample fails the acceptance test."""

    pass


def create_rejection_retrying(max_attempts: int = MAX_REJECTIONS) -> Retrying:
    """Create a retrying controller for rejection sampling.

    Only :class:`RejectedSample` triggers another attempt; any other error
    propagates immediately.

    Args:
        max_attempts: Maximum number of draws

    Returns:
        Tenacity retrying controller
    """
    return Retrying(
        stop=stop_after_attempt(max_attempts),
        retry=retry_if_exception_type(RejectedSample),
        after=after_log(logger, logging.DEBUG),
        reraise=False,
    )


def sample_until_accepted(
    draw: Callable[[], T], what: str, max_attempts: int = MAX_REJECTIONS
) -> T:
    """Call ``draw`` until it returns without raising :class:`RejectedSample`.

    Args:
        draw: Zero-argument sampler; raises RejectedSample to reject
        what: Description used in the error message
        max_attempts: Maximum number of draws

    Returns:
        The first accepted sample

    Raises:
        UnsatisfiableConstraintError: If every attempt was rejected
    """
    try:
        return create_rejection_retrying(max_attempts)(draw)
    except RetryError as e:
        logger.warning(f"Rejection sampling of {what} exhausted {max_attempts} attempts")
        raise UnsatisfiableConstraintError(
            f"Could not sample {what} after {max_attempts} rejections"
        ) from e
