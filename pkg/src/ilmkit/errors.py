"""Exception hierarchy.

Everything raised on bad input derives from :class:`IlmError`, so callers
(and the CLI) can separate data problems from programming errors.
"""


class IlmError(ValueError):
    """Base class for invalid models, data and requests."""


class ModelError(IlmError):
    """A model specification violates its invariants."""


class ResolutionError(ModelError):
    """A covariate formula names a column the population does not have."""


class PositivityError(ModelError):
    """A susceptibility/transmissibility value that must be positive is not."""


class SingularDistanceError(ModelError):
    """Two interacting individuals share a location, so d^-beta is undefined."""

    def __init__(self, i, j):
        self.pair = (i, j)
        super().__init__(
            f"individuals {i} and {j} are at distance 0; the power-law kernel is singular"
        )


class DataError(IlmError):
    """Epidemic, population or network data is inconsistent."""


class ParseError(DataError):
    """A file could not be parsed. Carries the 1-based line and column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SeedingError(DataError):
    """Initial infection times were supplied but contain no infective."""


class InitializationError(IlmError):
    """The MCMC starting point has zero posterior density."""


class RequestError(IlmError):
    """A request cannot be satisfied with the available inputs."""
