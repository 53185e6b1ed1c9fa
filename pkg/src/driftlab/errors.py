"""Exception hierarchy shared across the package."""


class DriftLabError(Exception):
    """Base class for all package errors."""


class ShapeError(DriftLabError, ValueError):
    """Array dimensions do not match what an operation expects."""


class ValidationError(DriftLabError, ValueError):
    """Input values violate an operation's preconditions."""


class NumericError(DriftLabError, ArithmeticError):
    """A computation produced or received non-finite values."""


class ContractError(DriftLabError, RuntimeError):
    """A protocol-level contract was violated (e.g. metric cells accessed out of order)."""


class DataAccessError(DriftLabError, RuntimeError):
    """A strategy tried to read real data it is not entitled to."""


class ConfigError(DriftLabError, ValueError):
    """Experiment configuration is invalid. Carries every violation found, not just the first."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
