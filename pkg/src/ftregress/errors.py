"""Exception hierarchy shared by the library and the command line driver."""


class FTError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(FTError, ValueError):
    """Inconsistent options, shapes or domains."""

    exit_code = 2


class InputError(FTError, ValueError):
    """Bad user data: non-finite values, dimension mismatch, parse failures."""

    exit_code = 3


class FormatError(InputError):
    """Malformed or version-mismatched model file."""


class UnsupportedError(FTError, NotImplementedError):
    """Operation not defined for this parameterization."""

    exit_code = 2


class NumericalError(FTError, ArithmeticError):
    """Singular systems or failed line searches that cannot be recovered."""

    exit_code = 4
