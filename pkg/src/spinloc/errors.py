"""Exception hierarchy.

Input problems derive from ``InputError`` (a ``ValueError``); numerical
failures derive from ``NumericalError``. The CLI maps them to exit codes
2 and 3 respectively.
"""


class SpinlocError(Exception):
    """Base class for all package errors."""


class InputError(SpinlocError, ValueError):
    """Invalid argument or malformed input data."""


class DomainError(InputError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedAliasOrderError(InputError):
    """Odd alias order, which has no phase-recovery rule."""


class StepTooLargeError(InputError):
    """Integrator step exceeds the stability bound."""


class NumericalError(SpinlocError, ArithmeticError):
    """A computation could not produce a trustworthy result."""


class DegenerateAxisError(NumericalError):
    """Rotation or precession axis is undefined."""


class InconsistentInputsError(NumericalError):
    """Inputs admit no real solution (e.g. a negative radicand)."""


class SingularGeometryError(NumericalError):
    """The inversion is singular at the requested parameters."""


class IllConditionedError(NumericalError):
    """Result is numerically meaningless (e.g. azimuth of a polar vector)."""


class UnidentifiableError(NumericalError):
    """Data carry no information about the requested parameters."""


class FitError(NumericalError):
    """Fit did not converge; carries the best residual reached."""

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual
