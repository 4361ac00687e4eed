"""Exception hierarchy shared by every module."""


class GammaDiffError(Exception):
    """Base class for library errors."""


class InvalidInputError(GammaDiffError, ValueError):
    """Arguments violate a documented precondition."""


class NoSignalError(GammaDiffError):
    """The power spectrum carries no energy outside the DC bin."""


class ConvergenceError(GammaDiffError):
    """An iterative solver ran out of iterations.

    The last iterate and its residual are kept so callers can decide
    whether the partial answer is usable.
    """

    def __init__(self, message, last_iterate=None, residual=float("nan")):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class OptimizationError(GammaDiffError):
    """Every start of a parameter search failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class FitError(GammaDiffError):
    """Least-squares fit cannot be computed (rank deficient design)."""


class DataFileError(GammaDiffError):
    """A data file is missing, unreadable or malformed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f", line {line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
