"""Exception hierarchy shared by all decaf modules."""


class DecafError(Exception):
    """Base class for every error raised by the package."""


class InputError(DecafError):
    """Malformed input: bad file, bad config, invalid arguments."""


class DomainError(DecafError):
    """Input is well formed but outside the domain of an operation."""


class NumericalError(DecafError):
    """An iterative or linear-algebra routine failed."""


class NotConverged(NumericalError):
    pass


class DegenerateInPlane(DomainError):
    """All directions are (anti)parallel to the constraint axis."""


class EmptyNeighborhood(DomainError):
    pass


class UnsupportedOrder(DomainError):
    pass


class UnknownSpecies(DomainError):
    pass


class GridMismatch(DomainError):
    pass


class ZeroFingerprint(DomainError):
    pass


class AllDisconnected(DomainError):
    pass


class SingularCovariance(NumericalError):
    pass


class OracleFailure(DecafError):
    def __init__(self, structure_id, reason):
        super().__init__(f"oracle failed on structure {structure_id!r}: {reason}")
        self.structure_id = structure_id
        self.reason = reason


class ParseError(InputError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class UnknownElement(ParseError):
    pass


class SchemaError(InputError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
