class ZslError(Exception):
    """Base class for toolkit errors."""


class ValidationError(ZslError, ValueError):
    """Bad input: missing files, shape mismatch, out-of-range values."""


class NumericalError(ZslError, ArithmeticError):
    """Training produced a non-finite quantity."""
