"""Exception types shared across the package.

Each class carries an ``exit_code`` used by the command-line front end.
"""


class GWSubtreeError(Exception):
    exit_code = 1


class TreeParseError(GWSubtreeError, ValueError):
    """Malformed parenthesis or degree-sequence text."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class InvalidDistributionError(GWSubtreeError, ValueError):
    exit_code = 3


class InfeasibleSizeError(GWSubtreeError, ValueError):
    exit_code = 4


class OracleTooLargeError(GWSubtreeError, ValueError):
    exit_code = 5


class IncompleteTableError(GWSubtreeError, KeyError):
    pass


class DegenerateSampleError(GWSubtreeError, ArithmeticError):
    pass


class PrecisionError(GWSubtreeError, ArithmeticError):
    pass
