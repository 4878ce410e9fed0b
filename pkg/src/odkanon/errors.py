"""Exception hierarchy shared by every module."""


class ODKAnonError(Exception):
    """Base class for all toolkit errors."""


class AboveRoot(ODKAnonError):
    pass


class UnknownCell(ODKAnonError):
    pass


class LeafCell(ODKAnonError):
    pass


class MissingCentroid(ODKAnonError):
    pass


class InvalidHierarchy(ODKAnonError):
    pass


class ParseError(ODKAnonError):
    def __init__(self, row: int, column: str, reason: str):
        self.row = row
        self.column = column
        self.reason = reason
        super().__init__(f"row {row}, column {column!r}: {reason}")


class NonPositiveWeight(ParseError):
    pass


class MissingAttribute(ODKAnonError):
    pass


class MissingWeights(ODKAnonError):
    pass


class EmptyDataset(ODKAnonError):
    pass


class EmptyMatrix(ODKAnonError):
    pass


class DisjointRoots(ODKAnonError):
    pass


class InconsistentInputs(ODKAnonError):
    pass


class InsufficientVolume(ODKAnonError):
    pass


class NoValidClasses(ODKAnonError):
    pass


class NotApplicable(ODKAnonError):
    pass


class InvalidConfig(ODKAnonError):
    pass


class DeadlineExceeded(ODKAnonError):
    """Raised by cooperative deadline checks inside long loops."""
