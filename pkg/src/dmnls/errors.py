"""Exception types shared across the package."""


class DmnlsError(Exception):
    """Base class for all package-specific errors."""


class GridError(DmnlsError, ValueError):
    """Invalid grid construction (point count, length)."""


class FieldError(DmnlsError, ValueError):
    """Invalid field data or a field outside an operation's domain."""


class QuadratureError(DmnlsError, ValueError):
    """Invalid quadrature or nonlinearity specification."""


class ConvergenceError(DmnlsError, RuntimeError):
    """Iterative solve failed: non-convergence, collapse, or a rejected result."""


class OverflowBlowupError(DmnlsError, FloatingPointError):
    """Field amplitude exceeded the overflow guard; blowup suspected."""


class BoundaryWrapError(DmnlsError, RuntimeError):
    """x-weighted quantity dominated by mass wrapped around the periodic box."""


class ConfigError(DmnlsError, ValueError):
    """Experiment configuration failed to parse or validate."""
