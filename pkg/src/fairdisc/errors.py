"""Exception types shared across the package."""


class CapacityError(ValueError):
    """An exact-enumeration operation was asked to exceed its configured budget."""


class PositiveCycleError(ValueError):
    """Payments require an envy graph without positive-weight cycles."""


class InvariantViolation(RuntimeError):
    """An internal guarantee failed; indicates a bug, not bad input."""
