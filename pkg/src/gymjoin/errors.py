"""Exception hierarchy shared by every gymjoin module."""


class GymError(Exception):
    """Base class for all library errors."""


class SchemaError(GymError, ValueError):
    pass


class QueryError(GymError, ValueError):
    pass


class DisconnectedQueryError(QueryError):
    """The query hypergraph has more than one connected component."""


class ParseError(GymError, ValueError):
    """Malformed query text, relation TSV, or GHD JSON."""


class InvalidGhdError(GymError, ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class WidthError(GymError, ValueError):
    """An engine that needs a width-1 decomposition received a wider one."""


class TransformError(GymError, ValueError):
    pass


class SimulatorAbort(GymError, RuntimeError):
    """A virtual reducer received more than M tuples in one round."""

    def __init__(self, message, ledger=None):
        super().__init__(message)
        self.ledger = ledger


class OracleBudgetExceeded(GymError, RuntimeError):
    pass
