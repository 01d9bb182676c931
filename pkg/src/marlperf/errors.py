"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are not chain-compatible."""


class CacheError(RuntimeError):
    """A backward pass received a stale or shape-incongruent cache."""


class NumericError(FloatingPointError):
    """Non-finite values where finite ones are required."""


class ConfigError(ValueError):
    """Invalid configuration value or plan-invariant violation."""


class ActionError(ValueError):
    """An agent submitted an action outside its action space."""


class ProtocolError(RuntimeError):
    """Communication-protocol contract violated (missing/mismatched payloads)."""


class TimingError(ValueError):
    """Clock misuse: negative span or invalid category."""


class ContractViolation(RuntimeError):
    """A usage contract was broken (e.g. reusing a consumed on-policy batch)."""


class UndefinedBreakdownError(ValueError):
    """Percentage breakdown requested over a zero-duration total."""


class DegenerateMeasurementError(ValueError):
    """IPS requested for a non-positive phase duration."""
