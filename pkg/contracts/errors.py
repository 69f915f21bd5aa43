"""
Error taxonomy for Cutpoint.

Every error carries the process exit code the CLI should use, so callers can
map failures without inspecting messages.
"""
from typing import Optional


class CutpointError(Exception):
    """Base class for all expected failures."""

    exit_code = 3

    def __init__(self, message: str, *, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration

    def annotate(self, iteration: int) -> "CutpointError":
        """Attach the pipeline iteration if nothing deeper set it already."""
        if self.iteration is None:
            self.iteration = iteration
        return self

    def __str__(self) -> str:
        base = super().__str__()
        if self.iteration is not None:
            return f"{base} (iteration {self.iteration})"
        return base


class ConfigError(CutpointError):
    """Unknown config key, bad value or malformed override."""

    exit_code = 2

    def __init__(self, message: str, *, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class ArgumentError(CutpointError, ValueError):
    """Invalid arguments to a library call."""

    exit_code = 2


class NumericalError(CutpointError):
    """Non-finite loss or gradient inside the solver."""

    exit_code = 3

    def __init__(self, message: str, *, stage: Optional[int] = None, iteration: Optional[int] = None):
        super().__init__(message, iteration=iteration)
        self.stage = stage


class SamplingDegenerateError(CutpointError):
    """The active set is empty on the estimation slice (p_hat = 0)."""

    exit_code = 3


class UnsupportedRegimeError(ArgumentError):
    """Smoothness below 1 has no tuning schedule."""

    exit_code = 3


class BudgetError(CutpointError):
    """Label budget exhausted, or a requested label is unavailable."""

    exit_code = 4
