"""Exception hierarchy shared by all splitkit modules."""


class SplitkitError(Exception):
    """Base class for all errors raised by splitkit."""


class InvalidArgument(SplitkitError, ValueError):
    pass


class ConfigurationError(SplitkitError):
    pass


class ResourceError(SplitkitError):
    pass


class ConvergenceError(SplitkitError):
    """Krylov projection did not reach the requested tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class AccuracyError(SplitkitError):
    """A self-check on a reference computation failed.

    ``candidates`` holds whatever values were compared (e.g. the two
    reference solutions of a Richardson check).
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class UnsupportedQuadrature(SplitkitError, ValueError):
    pass
