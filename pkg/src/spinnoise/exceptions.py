"""Exception types shared across the package."""


class SpinNoiseError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SpinNoiseError, ValueError):
    """An argument is outside the physically meaningful domain."""


class ContractViolationError(SpinNoiseError, ValueError):
    """An input state violates a structural requirement (e.g. Hermiticity)."""


class ConfigError(SpinNoiseError, ValueError):
    """A configuration file, key, or value is invalid."""


class NumericError(SpinNoiseError, ArithmeticError):
    """The numerics broke down (NaN/Inf encountered mid-run)."""


class SteadyStateError(SpinNoiseError, RuntimeError):
    """No unique steady state exists, or the solver failed to reach tolerance."""
