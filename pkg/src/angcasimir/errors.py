"""Exception hierarchy shared by all modules."""


class CasimirError(Exception):
    """Base class for errors raised by this package."""


class DomainError(CasimirError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    pass


class UnsupportedOperationError(CasimirError):
    pass


class ConvergenceError(CasimirError, RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``residual`` carries the last achieved error estimate.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class RangeError(DomainError):
    """Query outside a tabulated range; tables are never extrapolated."""


class ContactError(DomainError):
    """The two surfaces touch or interpenetrate."""

    def __init__(self, message, x=None, y=None):
        super().__init__(message)
        self.x = x
        self.y = y


class PrecisionError(CasimirError):
    pass


class RelaxationError(ConvergenceError):
    pass


class RankError(CasimirError, ValueError):
    """Least-squares design matrix is rank deficient."""


class FitError(ConvergenceError):
    pass


class InstabilityError(CasimirError, RuntimeError):
    """Self-consistent deflection iteration diverged (snap to contact)."""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class ConsistencyError(CasimirError):
    pass


class ConfigError(CasimirError, ValueError):
    pass
