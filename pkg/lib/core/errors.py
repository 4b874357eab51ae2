"""Exception hierarchy and the diagnostic violation record."""
from collections import namedtuple

Violation = namedtuple('Violation', ['kind', 'where', 'detail'])


class EmbeddingError(Exception):
    """Root of all errors raised by the toolkit."""


class ParameterError(EmbeddingError, ValueError):
    """A numeric or enum parameter is out of range."""


class InputError(EmbeddingError, ValueError):
    """Input data does not satisfy an operation's precondition."""


class DegenerateInputError(InputError):
    pass


class InfiniteDistanceError(InputError):
    """A graph is disconnected, so some distance is infinite."""


class GenerationError(EmbeddingError):
    pass


class BudgetError(EmbeddingError):
    """An operation would exceed a configured size budget."""


class UnknownLeafError(EmbeddingError, KeyError):
    pass


class ConsistencyError(EmbeddingError):
    """An internal invariant failed; indicates a bug or a floating-point failure."""


def violation_dicts(violations):
    return [v._asdict() for v in violations]
