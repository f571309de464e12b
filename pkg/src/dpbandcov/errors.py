"""Exception hierarchy."""


class DPBandCovError(Exception):
    """Base class for all package errors."""


class ArgumentError(DPBandCovError, ValueError):
    """An argument is outside its documented domain."""


class NumericError(DPBandCovError, ArithmeticError):
    """Non-finite input or a numerical routine failed to converge."""


class BudgetError(DPBandCovError):
    """A privacy allocation would exceed the declared total budget."""


class ModelError(DPBandCovError, ValueError):
    """A covariance model is not symmetric positive definite."""


class LayoutError(DPBandCovError, ValueError):
    """Blocks passed as a tridiagonal layout do not form one."""


class FitError(DPBandCovError, ValueError):
    """A regression fit is degenerate."""


class ConfigError(DPBandCovError, ValueError):
    """An experiment config failed validation; ``field`` names the offender."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
