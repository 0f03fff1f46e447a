"""Exception hierarchy shared by the solver modules and the CLI."""


class PIEError(Exception):
    """Base class for every error raised by the solver"""


class InvalidArgumentError(PIEError, ValueError):
    pass


class UnsupportedDimensionError(InvalidArgumentError):
    pass


class DomainError(InvalidArgumentError):
    pass


class UnsupportedOrderError(InvalidArgumentError):
    pass


class InterpolationUnsupportedError(PIEError):
    pass


class EvaluationError(PIEError):
    pass


class SingularFiberError(PIEError):
    def __init__(self, alpha, det_abs: float, message: str = None):
        self.alpha = alpha
        self.det_abs = det_abs
        super().__init__(message or f"Singular fiber at alpha={alpha} (|det|={det_abs:.3e})")


class InternalConsistencyError(PIEError):
    pass


class ProblemParseError(PIEError):
    def __init__(self, message: str, line: int = None, column: int = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ProblemValidationError(PIEError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
