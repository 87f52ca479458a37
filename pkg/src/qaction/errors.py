"""Exception hierarchy shared by every qaction module."""


class QActionError(Exception):
    """Base class for all errors raised by qaction."""


# potential / expression language
class ExprSyntaxError(QActionError):
    """Malformed potential expression.

    ``position`` is the byte offset into the source where parsing failed.
    """

    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.message = message
        self.position = position


class UnknownIdentifier(QActionError):
    def __init__(self, name, position):
        super().__init__(f"unknown identifier {name!r} at offset {position}")
        self.name = name
        self.position = position


class DomainError(QActionError):
    pass


class UnknownBuiltin(QActionError):
    pass


class InvalidParam(QActionError):
    pass


# discretize
class NoTurningPoints(QActionError):
    pass


class BracketTooNarrow(QActionError):
    pass


class UnboundedDirection(QActionError):
    pass


# engines
class StepTooCoarse(QActionError):
    pass


class PoleAtBoundary(QActionError):
    pass


class ToleranceNotMet(QActionError):
    pass


class TurningPointSingularity(QActionError):
    pass


class NotAnEigenvalue(QActionError):
    pass


# quantize / oracles
class NoSuchBoundState(QActionError):
    pass


class MonotonicityViolation(QActionError):
    pass


class NonConvergence(QActionError):
    pass


class NoCatalogEntry(QActionError):
    pass


class ConfigError(QActionError):
    """Invalid run configuration; ``key`` names the offending dotted key."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
