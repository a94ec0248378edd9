"""Exception types shared across the package."""


class QnnVarError(Exception):
    """Base class for all errors raised by qnnvar."""


class CapacityError(QnnVarError, ValueError):
    """Requested register is outside the supported qubit range."""


class QubitIndexError(QnnVarError, IndexError):
    """Qubit or basis-state index out of range (or a repeated qubit)."""


class DomainError(QnnVarError, ValueError):
    """Input feature outside the arccos domain [-1, 1]."""


class ObservableError(QnnVarError, ValueError):
    """Unsupported or non-diagonal cost operator."""


class CountsError(QnnVarError, ValueError):
    """Malformed or empty measurement counts."""


class ConfigError(QnnVarError, ValueError):
    """Invalid training configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DataFormatError(QnnVarError, ValueError):
    """Malformed data file. ``row`` is the 1-based line number when known."""

    def __init__(self, message: str, row: int | None = None):
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)
        self.row = row


class NumericAbort(QnnVarError, ArithmeticError):
    """Training hit a non-finite loss or gradient.

    ``params`` holds the last finite parameters and ``log`` the records
    completed before the abort.
    """

    def __init__(self, message: str, params=None, log=None):
        super().__init__(message)
        self.params = params
        self.log = log
