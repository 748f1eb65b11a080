"""Exception hierarchy shared by every module of the package."""


class OenscError(Exception):
    """Base class for all errors raised by ``oensc``."""


class DomainError(OenscError, ValueError):
    """Input lies outside the domain of an operator (e.g. non-finite entries)."""


class DimensionError(OenscError, ValueError):
    """Operand shapes disagree.

    The offending operand name is kept on ``operand`` so callers can report it.
    """

    def __init__(self, operand, expected, got):
        self.operand = operand
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch for {operand!r}: expected {expected}, got {got}")


class ConfigError(OenscError, ValueError):
    """Invalid or infeasible configuration."""


class FactorizationError(OenscError):
    """The shifted Gram matrix could not be Cholesky-factorized."""

    def __init__(self, message, smallest_pivot):
        self.smallest_pivot = smallest_pivot
        super().__init__(f"{message} (smallest pivot {smallest_pivot:.3e})")


class StaleFactorizationError(OenscError):
    """A factorization was used against a dictionary version it was not built from."""


class DivergenceError(OenscError):
    """An ADMM iterate became non-finite. The partial trace is attached."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class DegenerateAffinityError(OenscError):
    """The affinity matrix carries no edges, so no spectral embedding exists."""


class ParseError(OenscError, ValueError):
    """Malformed matrix, label or config file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
