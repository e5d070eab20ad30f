"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands act on different qubit counts."""


class DegenerateError(ValueError):
    """Input sits on a singular point of a closed-form expression."""


class LogDomainError(ValueError):
    """A sample mean is non-positive and cannot be log-transformed."""


class CapacityError(RuntimeError):
    """Requested problem size exceeds a desk-scale guard."""
