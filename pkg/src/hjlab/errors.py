"""Exception hierarchy shared by every module."""

from __future__ import annotations


class HJLabError(Exception):
    """Base class for every error raised by the package."""


class DiagnosticsError(HJLabError, ValueError):
    """Non-finite values reached an operator or a solver."""


class GridError(HJLabError, ValueError):
    """Inconsistent grid geometry or an unrepresentable stencil."""


class StructureError(HJLabError, ValueError):
    """The Hamiltonian lacks the structure an operation requires."""


class CFLError(HJLabError, ValueError):
    """A time step violates the stability restriction of the scheme."""


class ConvergenceError(HJLabError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


class SolverDivergence(HJLabError, RuntimeError):
    """Time stepping produced non-finite values; ``last_frame`` is the last finite state."""

    def __init__(self, message: str, last_frame=None):
        super().__init__(message)
        self.last_frame = last_frame


class ConfigError(HJLabError, ValueError):
    """An experiment configuration could not be parsed or resolved."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + location)
        self.line = line
        self.column = column


class ReferenceGuardError(HJLabError, RuntimeError):
    """A reference solution is not accurate enough for the errors it should measure."""
