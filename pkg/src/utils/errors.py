"""
Exception hierarchy shared by the library and the command-line scripts.

Every error carries the process exit code the scripts use when it escapes
``main()``: 1 for usage and configuration problems, 2 for data problems and
3 for numerical failures.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class MpnError(Exception):
    """Base class for every error raised by this package."""

    exit_code = EXIT_USAGE


class ShapeError(MpnError, ValueError):
    """Operand extents do not fit the operation."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        rendered = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: dimension mismatch {rendered}")


class ParameterError(MpnError, ValueError):
    """A numeric argument lies outside its valid range."""


class ConfigError(MpnError):
    """Malformed configuration file, unknown key or invalid value."""


class DataError(MpnError):
    """Input data cannot be used."""

    exit_code = EXIT_DATA


class BadMagicError(DataError):
    """The bundle does not start with the MPNF magic."""


class VersionMismatchError(DataError):
    """The bundle was written with an unsupported format version."""


class TruncatedBundleError(DataError):
    """The bundle is shorter than its header announces."""


class NumericalError(MpnError, ArithmeticError):
    """A loss, gradient or finite-difference value is not finite."""

    exit_code = EXIT_NUMERICAL


class GradCheckFailure(NumericalError):
    """Analytic and finite-difference gradients disagree."""
