"""Exception hierarchy for the Visit Optimizer.

Every error carries the process exit code the CLI maps it to.
"""

from __future__ import annotations

from pathlib import Path


class VisitOptimizerError(Exception):
    """Base class for all domain errors."""

    exit_code: int = 1


class InvalidConfig(VisitOptimizerError, ValueError):
    exit_code = 3


class IoError(VisitOptimizerError, OSError):
    exit_code = 4


class ParseError(VisitOptimizerError):
    """Malformed input file; reports file and (when known) line number."""

    exit_code = 5

    def __init__(self, message: str, *, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(f"{where}{message}")


class TooLarge(VisitOptimizerError):
    """Exhaustive search refused because the instance exceeds the size guard."""

    exit_code = 6


SolverGuard = TooLarge


class EmptySession(VisitOptimizerError):
    exit_code = 7


class EmptyTraining(VisitOptimizerError):
    exit_code = 7


class TooFewSessions(VisitOptimizerError):
    exit_code = 8


class IndexOutOfRange(VisitOptimizerError, IndexError):
    exit_code = 1
