"""Exception hierarchy.

Every error raised for a mathematically invalid request derives from
:class:`DomainError`; the CLI maps those to exit status 1.
"""


class DomainError(Exception):
    """Base class for domain errors (invalid lattice, pole inputs, ...)."""

    def to_json(self):
        return {"error": type(self).__name__, "message": str(self)}


class DegenerateLattice(DomainError):
    pass


class ToleranceUnreachable(DomainError):
    pass


class RootMatchFailed(DomainError):
    pass


class PoleAtInput(DomainError):
    """The argument lies on (or within tolerance of) a lattice point."""


class InverseNotFound(DomainError):
    pass


class RootCountMismatch(DomainError):
    pass


class PoleOfNewtonMap(DomainError):
    """The point is a pole of the Newton map; ``step`` is the orbit index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NotTriangular(DomainError):
    pass


class IoFailure(DomainError):
    pass


class NotLatticePoint(DomainError):
    pass
