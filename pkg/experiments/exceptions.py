"""
Exit codes and the exception handler of the management commands.
"""
import logging

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from quantum.exceptions import (
    ArgumentError,
    CapacityError,
    EstimateRangeError,
    EstimationError,
    InvariantFailure,
    OutputError,
    StateValidationError,
    TrainingError,
)

logger = logging.getLogger('experiments')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2
EXIT_ESTIMATION = 3

USAGE_ERRORS = (ArgumentError, CapacityError, ValidationError)
ESTIMATION_ERRORS = (EstimationError, TrainingError, EstimateRangeError, StateValidationError, OutputError)


def command_exception_handler(exc, context):
    """
    Map an exception raised inside a command to a CommandError with the
    matching exit code, logging it with the command context.
    """
    if isinstance(exc, CommandError):
        return exc

    command = context.get('command', 'unknown')
    logger.error(f"Exception in command: {exc.__class__.__name__} - {exc} - Command: {command}")

    if isinstance(exc, USAGE_ERRORS):
        return CommandError(str(exc), returncode=EXIT_USAGE)
    if isinstance(exc, InvariantFailure):
        return CommandError(str(exc), returncode=EXIT_INVARIANT)
    if isinstance(exc, ESTIMATION_ERRORS):
        return CommandError(str(exc), returncode=EXIT_ESTIMATION)

    logger.error(f"Unhandled exception: {exc.__class__.__name__} - {exc}")
    return CommandError(f"An unexpected error occurred: {exc}", returncode=EXIT_ESTIMATION)
