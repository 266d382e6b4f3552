"""Exception types shared across the package."""


class ACBError(Exception):
    """Base class for errors raised by acbandit."""


class InvalidArgument(ACBError, ValueError):
    """Bad input: wrong shape, non-finite value, out-of-range parameter."""


class ModeViolation(ACBError, RuntimeError):
    """Operation not permitted in the ensemble's target-sampling mode."""


class NumericFailure(ACBError, ArithmeticError):
    """Floating-point breakdown (non-PD matrix, divergent iterates, NaN scores)."""
