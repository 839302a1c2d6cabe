"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` used by the command line front end.
"""


class RbmTransferError(Exception):
    exit_code = 1


class InvalidArgumentError(RbmTransferError, ValueError):
    exit_code = 2


class DimensionError(InvalidArgumentError):
    exit_code = 5


class CapacityError(RbmTransferError):
    """Raised when an exact (enumeration based) computation would be too large."""

    exit_code = 6


class NumericalError(RbmTransferError, ArithmeticError):
    exit_code = 7


class FormatError(RbmTransferError):
    exit_code = 4


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class CountMismatchError(FormatError):
    pass
