"""Exception hierarchy for the lab.

Library code raises these; the tool registry, the lab API and the CLI turn
them into ``{"status": "error", "message": ...}`` results.
"""
from __future__ import annotations

from typing import Optional


class LabError(Exception):
    """Root of every error raised by genprior."""


class ConfigurationError(LabError, ValueError):
    """Invalid configuration value, unknown enumeration member or missing column."""


class DomainError(LabError, ValueError):
    """Input outside the domain of an operation (empty cloud, dimension mismatch, ...)."""


class NumericalError(LabError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite output."""

    def __init__(self, message: str, iterations: Optional[int] = None, violation: Optional[float] = None):
        super().__init__(message)
        self.iterations = iterations
        self.violation = violation


class DegeneracyError(NumericalError):
    """Importance weights, normalising sums or a series variance collapsed to zero."""


class TrainingError(NumericalError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, stage: Optional[int] = None):
        super().__init__(message)
        self.epoch = epoch
        self.stage = stage


class ChainError(LabError):
    """An MCMC chain failed at a given step."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class AdaptationError(ChainError):
    """Burn-in adaptation drove the pCN parameter out of its admissible range."""


def describe(error: BaseException) -> str:
    """Short ``Name: message`` tag used in result rows."""
    return f"{type(error).__name__}: {error}"
