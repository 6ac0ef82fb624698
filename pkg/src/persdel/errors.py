class PersDelError(Exception):
    """Base class for validation and solver errors."""


class OutOfDomain(PersDelError, ValueError):
    pass


class DegreeOverflow(PersDelError, ValueError):
    pass


class NonMonotone(PersDelError, ValueError):
    pass


class DomainMismatch(PersDelError, ValueError):
    pass


class WrongOrientation(PersDelError, ValueError):
    pass


class UnbalancedSet(PersDelError, ValueError):
    pass


class MissingDensity(PersDelError, ValueError):
    pass


class NotUnimodal(PersDelError, ValueError):
    pass


class BracketFailure(PersDelError, RuntimeError):
    pass


class UnsupportedShape(PersDelError, ValueError):
    pass


class UnboundedV(PersDelError, ValueError):
    pass


class TooManyCells(PersDelError, ValueError):
    pass
