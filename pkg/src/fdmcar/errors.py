"""Exception hierarchy.

Two families matter to callers: ``InputError`` (bad files, bad shapes) and
``ValidationError`` (the data are readable but the test cannot be run on
them). The CLI maps them to exit codes 1 and 2.
"""


class FdmcarError(Exception):
    """Base class for all package errors."""


class InputError(FdmcarError):
    """Malformed input data or arguments."""


class FormatError(InputError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ParseError(InputError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DimensionError(InputError):
    pass


class ValidationError(FdmcarError):
    """The data cannot support the requested statistical procedure."""


class NoTestableSubdomain(ValidationError):
    def __init__(self, message, max_min_count=None):
        super().__init__(message)
        self.max_min_count = max_min_count


class AssumptionViolation(ValidationError):
    pass


class DegenerateError(ValidationError):
    """Zero observation probability, zero variance or an all-zero spectrum."""


class NumericalError(FdmcarError):
    pass
