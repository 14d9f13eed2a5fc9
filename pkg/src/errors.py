"""Exception hierarchy shared by all toolkit modules."""
from typing import Iterable, List, Optional


class CESError(Exception):
    """Base class for toolkit errors."""


class InputValidationError(CESError, ValueError):
    """Raised for bad inputs: files, terms, dates, windows, configs.

    ``lines`` holds the 1-based line numbers of offending rows when the error
    comes from a file.
    """

    def __init__(self, message: str, lines: Optional[Iterable[int]] = None):
        self.lines: List[int] = sorted(lines) if lines else []
        if self.lines:
            shown = ", ".join(str(n) for n in self.lines[:20])
            more = f" (+{len(self.lines) - 20} more)" if len(self.lines) > 20 else ""
            message = f"{message} [lines {shown}{more}]"
        super().__init__(message)


class NumericalError(CESError, ArithmeticError):
    """Raised when a numerical procedure fails or cannot be evaluated."""
