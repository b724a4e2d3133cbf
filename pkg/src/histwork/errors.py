"""Exception hierarchy. The CLI maps each class onto a fixed exit code."""


class HistworkError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(HistworkError, ValueError):
    """Invalid protocol configuration or run settings."""

    exit_code = 2

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ResourceError(HistworkError):
    """A trajectory count or state count exceeds the enumeration cap."""

    exit_code = 3

    def __init__(self, message, required=None, cap=None):
        self.required = required
        self.cap = cap
        super().__init__(message)


class NumericalError(HistworkError, ArithmeticError):
    """Eigensolver failure or a violated internal-consistency check."""

    exit_code = 4

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class DomainError(HistworkError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class ShapeError(HistworkError, ValueError):
    """Operator dimensions do not match."""

    exit_code = 2


class DegeneracyError(NumericalError):
    """Raised in strict mode when eigenvalues would have to be merged."""


class RegressionError(HistworkError, AssertionError):
    """A frozen reproduction no longer shows its expected qualitative features."""

    exit_code = 5
