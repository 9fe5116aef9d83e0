"""
Custom exceptions for the momentfield package.

Library code raises these; only ``momentfield.cli.main`` turns them into exit codes.
"""
from typing import Optional, Sequence


class MomentFieldError(Exception):
    """Base exception for all momentfield errors."""

    exit_code = 3


class ConfigurationError(MomentFieldError):
    """Raised when a network file or a parameter override is invalid."""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class EvaluationError(MomentFieldError):
    """Raised when a vector field is evaluated on a non-finite state."""

    pass


class IntegrationError(MomentFieldError):
    """Raised when time stepping fails; keeps the last valid point of the run."""

    def __init__(self, message: str, last_time: float = None, last_state: Sequence[float] = None):
        self.last_time = last_time
        self.last_state = last_state
        if last_time is not None:
            message = f"{message} (last valid time t={last_time:.6g})"
        super().__init__(message)


class OrbitClosureError(MomentFieldError):
    """Raised when an orbit handed to the monodromy integration does not close."""

    def __init__(self, mismatch: float, tolerance: float):
        self.mismatch = mismatch
        self.tolerance = tolerance
        super().__init__(f"Orbit does not close: |x(T) - x(0)| = {mismatch:.3e} > {tolerance:.1e}")


class CycleNotFoundError(MomentFieldError):
    """Raised when the shooting Newton iteration finds no periodic orbit."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")


class NotAHopfCandidateError(MomentFieldError):
    """Raised when the one-population Hopf construction preconditions fail."""

    pass


class ModelError(MomentFieldError):
    """Raised when a Markov model produces an invalid transition rate."""

    pass


class StateSpaceTooLargeError(MomentFieldError):
    """Raised when the master equation state space is too large to integrate."""

    exit_code = 4

    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"State space has {size} states, above the limit of {limit}")
