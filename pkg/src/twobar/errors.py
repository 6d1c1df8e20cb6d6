"""Exception hierarchy for the twobar package.

Everything raised on purpose derives from :class:`TwobarError`, so callers can
catch one type at the boundary (the CLI does exactly that).
"""


class TwobarError(Exception):
    """Base class for all twobar errors."""


class GridError(TwobarError):
    """Malformed grid or path data (shapes, ordering, file contents)."""


class FormatError(TwobarError):
    """Unreadable or contract-violating input file (CSV, config)."""


class ConfigError(TwobarError):
    """Invalid problem configuration."""


class DomainError(TwobarError):
    """Mathematically inadmissible input (initial condition, separation, range)."""


class ConvergenceError(TwobarError):
    """Picard iteration failed to converge.

    Carries the solver diagnostics so the caller can see what happened and
    act on the suggested remedy (a smaller localization budget).
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
