"""Exception and warning types shared across the package."""


class EllipticMCError(Exception):
    """Base class for all package errors."""


class InputError(EllipticMCError, ValueError):
    """Caller passed something malformed: bad dimensions, unknown labels,
    sequences that do not approach the boundary, ..."""


class ConfigurationError(EllipticMCError, ValueError):
    """A problem or run configuration is unusable (empty grid, implicit
    domain without an enclosing radius, unknown schema keys, ...)."""


class NumericalError(EllipticMCError, RuntimeError):
    """A numerical procedure failed to converge or hit a hard cap
    (path step cap, boundary bisection cap, kernel singularity)."""


class HypothesisViolation(EllipticMCError, ValueError):
    """A standing hypothesis of the solved problem class fails
    (gamma_0 <= 0, sup phi >= b, contraction condition violated, ...)."""


class AccuracyWarning(UserWarning):
    """Raised via warnings.warn when a quadrature is too coarse for the
    requested quantity."""


class ConfigurationWarning(UserWarning):
    """Non-fatal configuration smells (e.g. empty discontinuity set with
    non-constant boundary data)."""
