"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/config problems exit 2,
tolerance failures exit 3, internal numerical failures exit 4.
"""


class KeyidError(Exception):
    """Base class for all package errors."""


class UnsupportedLevelError(KeyidError):
    """Level outside the supported set (non-squarefree, or no form data)."""


class ConfigError(KeyidError):
    """Malformed run configuration.

    Carries the (line, column) the parser choked on when available.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, col {column}: {message}"
        super().__init__(message)


class EnumerationCapError(KeyidError):
    """Predicted or actual orbit count exceeds the configured cap."""


class QuadratureError(KeyidError):
    """A quadrature failed to reach its requested tolerance."""


class BudgetError(KeyidError):
    """A certified error budget cannot be met at the requested parameters."""


class DomainError(KeyidError):
    """Input outside the operation's domain (bad point, elliptic point, ...)."""
