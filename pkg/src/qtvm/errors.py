"""Exception hierarchy shared across the virtual machine.

The CLI maps these onto process exit codes: compile-time problems exit 2,
runtime faults exit 1, capacity refusals exit 3.
"""

from __future__ import annotations


class QtvmError(Exception):
    """Base class for every error raised by this package."""


class CapacityError(QtvmError):
    """State allocation would exceed the configured memory budget."""


class CompileError(QtvmError):
    """Preprocessing, parsing, or validation failure, with source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", col {column}"
            where += ": "
        super().__init__(where + message)


class ExecutionError(QtvmError):
    """Fault while a program is running (bad operand, impossible branch, ...)."""


class MeasurementError(ExecutionError):
    """Collapse onto a branch of (numerically) zero probability."""


class NoDqptError(QtvmError):
    """Quench parameters admit no critical mode: no dynamical transition."""
