"""Exception types raised by the filter and its helpers."""


class FilterError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FilterError, ValueError):
    pass


class InvalidConfigError(FilterError, ValueError):
    pass


class DegeneratePositionError(FilterError, ArithmeticError):
    """Azimuth requested at (or iteration reached) the observer's location."""


class SingularSchemeError(FilterError, ArithmeticError):
    """The balanced implicit factor 1 - delta*f' vanished at some step."""

    def __init__(self, step, value):
        super().__init__(f"1 - delta*f' = {value!r} is near zero at step {step}")
        self.step = step
        self.value = value


class ConvergenceError(FilterError, ArithmeticError):
    """A fixed-point iteration did not reach its tolerance."""

    def __init__(self, message, residual=float("nan"), step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class UndefinedDiscriminantError(FilterError, ArithmeticError):
    pass


class NoBracketError(FilterError, ValueError):
    pass


class InfeasibleBandError(FilterError, RuntimeError):
    pass


class FailureBudgetError(FilterError, RuntimeError):
    """Too many Monte Carlo runs failed numerically."""
