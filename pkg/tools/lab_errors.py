#!/usr/bin/env python3
"""
Lab Errors - exception taxonomy and CLI exit-status mapping
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/06_error_handling.md
"""


class LabError(Exception):
    """Base class for every failure raised by the lab."""

    exit_code = 1


class InvalidInputError(LabError, ValueError):
    """A parameter, query or config value is outside its domain."""

    exit_code = 2


class RegimeMismatchError(InvalidInputError):
    """An example or construction was requested outside its alpha regime."""


class ResourceInfeasibleError(LabError):
    """The requested discretization cannot be built at desk scale."""

    exit_code = 3


class QuadratureNotConvergedError(ResourceInfeasibleError):
    """A grid computation disagreed with its half-spacing rerun."""

    def __init__(self, message: str, coarse: float = None, fine: float = None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


EXIT_OK = 0
EXIT_VERDICT_FAILURE = 1
EXIT_INVALID_CONFIG = 2
EXIT_INFEASIBLE = 3


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the runner's exit status.

    Args:
        error: Exception caught at the top level

    Returns:
        Exit status (2 invalid input, 3 infeasible, 1 otherwise)
    """
    if isinstance(error, LabError):
        return error.exit_code
    return EXIT_VERDICT_FAILURE
