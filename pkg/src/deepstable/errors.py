"""Exception hierarchy shared by all modules."""


class DeepStableError(Exception):
    """Base class for library errors."""


class ParameterDomainError(DeepStableError, ValueError):
    """A parameter lies outside its admissible domain."""


class UnsupportedRangeError(ParameterDomainError):
    """Valid parameter, but outside the range the numerics support."""


class MomentDivergenceError(ParameterDomainError):
    """Requested absolute moment of order p >= alpha, which is infinite."""


class EmptyInputError(DeepStableError, ValueError):
    pass


class DegenerateDataError(DeepStableError, ValueError):
    pass


class ShapeError(DeepStableError, ValueError):
    pass


class ConfigurationError(DeepStableError, ValueError):
    """Network or recursion configuration rejected (e.g. envelope check)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericalError(DeepStableError, ArithmeticError):
    """Quadrature failure, overflow, or other numerical breakdown."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ParseError(DeepStableError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
