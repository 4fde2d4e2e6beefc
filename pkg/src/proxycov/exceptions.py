"""Exception hierarchy.

Three branches matter for exit-code mapping in the CLI: input/validation
problems, numerical failures inside an estimator, and plain IO errors
(the latter are left to the builtin OSError family).
"""


class ProxycovError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ProxycovError):
    """Malformed input: bad shapes, bad values, bad configuration."""


class DimensionError(ValidationError):
    """Not enough data or mismatched dimensions for the requested operation."""


class UnsupportedDesignError(ValidationError):
    """Experiment layout outside the supported design (two equal arms, common n)."""


class SchemaError(ValidationError):
    """File contents do not match the expected schema."""

    def __init__(self, message: str, *, line: int | None = None, column: str | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(ProxycovError):
    """An estimator could not produce a usable answer from the given input."""


class ConditioningError(NumericalError):
    """A matrix that must be inverted is singular or effectively singular."""

    def __init__(self, message: str, *, eigenvalue: float | None = None):
        self.eigenvalue = eigenvalue
        if eigenvalue is not None:
            message = f"{message} (offending eigenvalue {eigenvalue:.6e})"
        super().__init__(message)


class DegenerateDirectionError(NumericalError):
    """The recovered direction has no component on the primary metric."""


class AmbiguousEigenvalueError(NumericalError):
    """The smallest eigenvalue is (numerically) repeated, so the direction is not unique."""

    def __init__(self, message: str, *, gap: float | None = None):
        self.gap = gap
        if gap is not None:
            message = f"{message} (eigenvalue gap {gap:.6e})"
        super().__init__(message)
