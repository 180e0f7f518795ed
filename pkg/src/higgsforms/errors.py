"""Exception hierarchy.

The CLI maps each family onto an exit status: parse problems exit 2,
validation problems exit 3, numeric singularities exit 4.
"""


class HiggsFormsError(Exception):
    """Base class for all package errors."""


class ParseError(HiggsFormsError, ValueError):
    """Malformed expression or job text.

    Attributes:
      position: zero-based character offset of the offending token, or None.
    """

    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnknownSymbolError(ParseError):
    """An identifier that is neither a coordinate, a conjugate coordinate, a
    parameter nor a known function."""


class JobSpecError(ParseError):
    """Structurally invalid job description."""


class ValidationError(HiggsFormsError, ValueError):
    """Input objects that fail a mathematical precondition."""


class ChartMismatchError(ValidationError):
    pass


class DegreeError(ValidationError):
    """Wrong form degree or bidegree for an operation."""


class NonHermitianError(ValidationError):
    pass


class NotPositiveDefiniteError(ValidationError):
    pass


class HiggsValidationError(ValidationError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IncompatibleConnectionsError(ValidationError):
    """Two connections whose (0,1) parts differ."""


class SingularityError(HiggsFormsError, ZeroDivisionError):
    """Division by zero or a singular matrix met during evaluation."""
