"""Exception types shared across the package."""


class DomainError(ValueError):
    """Parameters fall outside the region where a statement is proved."""


class GridError(ValueError):
    """A grid configuration file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ScanWarning(RuntimeWarning):
    """A ratio scan was truncated or may not have converged."""
