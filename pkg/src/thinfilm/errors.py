"""Exception types shared across the package."""


class ThinFilmError(Exception):
    """Base class for all package errors."""


class ModelRangeError(ThinFilmError, ValueError):
    """Concentration outside the range covered by a tabulated surface tension."""


class DomainError(ThinFilmError, ValueError):
    """Argument outside the mathematical domain of a function (e.g. Phi at s <= 0)."""


class PositivityError(ThinFilmError, ValueError):
    """State left the positivity cone h > 0, Gamma > 0."""


class ConfigError(ThinFilmError, ValueError):
    """Malformed or inconsistent run configuration."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class NumericalError(ThinFilmError, RuntimeError):
    """Linear algebra failure (singular factorization, eigensolver failure, ...)."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class DegeneracyStop(ThinFilmError, RuntimeError):
    """Time step underflow: the discrete surrogate of a finite maximal existence time."""

    def __init__(self, message, state=None, series=None):
        self.state = state
        self.series = series
        super().__init__(message)


class ConfluentRootsError(ThinFilmError, ArithmeticError):
    """Two decaying characteristic roots coincide; the boundary matrix is not Vandermonde-regular."""


class FitError(ThinFilmError, ValueError):
    """Decay fit impossible (too few samples, nonpositive norms)."""


class CheckpointError(ThinFilmError, ValueError):
    """Unreadable, truncated or incompatible checkpoint file."""

    def __init__(self, message, details=None):
        self.details = dict(details or {})
        super().__init__(message)
