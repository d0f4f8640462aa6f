"""Exception types shared across the package."""


class PqFiberError(Exception):
    """Base class for all package-specific errors."""


class InvalidGeometry(PqFiberError):
    """Grid construction parameters are inconsistent (radii, cell count, dimension)."""


class NonIntegrableWeight(PqFiberError):
    """Weight field fails the discrete integrability proxy (tail not stable under domain doubling)."""


class DimensionMismatch(PqFiberError):
    """Array length does not match the grid it is paired with."""


class DegenerateGradient(PqFiberError):
    """A sub-quadratic exponent met a zero cell gradient with no regularization enabled."""


class InfeasibleProfile(PqFiberError):
    """Profile has a nonnegative energy gap; no ray scale onto the Nehari set exists."""


class LeftFeasibleCone(PqFiberError):
    """An accepted iterate lost the negative-gap property; indicates a step-size bug."""


class EmptyFeasibleSet(PqFiberError):
    """Exhaustive search found no sample with negative gap (parameter at or below threshold)."""

    def __init__(self, message: str, lambda1_estimate: float | None = None):
        super().__init__(message)
        self.lambda1_estimate = lambda1_estimate


class NoConvergence(PqFiberError):
    """Iteration budget exhausted before reaching tolerance; carries the best iterate found."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class InsufficientData(PqFiberError):
    """Not enough converged records to evaluate the asymptotic verdict."""


class IoFailure(PqFiberError):
    """Output files could not be written."""


class ConfigError(PqFiberError):
    """Configuration file or flag values are invalid; message names the field."""
