"""Exception and warning types shared across the package."""


class ConformalBoxError(Exception):
    """Base class for all errors raised by this package."""


class MissingColumn(ConformalBoxError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} not found in header")


class NonNumericCell(ConformalBoxError):
    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"cell {value!r} at data row {row}, column {col!r} is not numeric")


class EmptyFile(ConformalBoxError):
    pass


class EmptyFitSet(ConformalBoxError):
    pass


class TooFewRows(ConformalBoxError):
    pass


class DimensionMismatch(ConformalBoxError):
    pass


class NonFiniteLoss(ConformalBoxError):
    pass


class EmptySample(ConformalBoxError):
    pass


class LengthMismatch(ConformalBoxError):
    pass


class DomainError(ConformalBoxError):
    pass


class CalibTooSmall(ConformalBoxError):
    pass


class EmptyTestSet(ConformalBoxError):
    pass


class ConfigError(ConformalBoxError):
    pass


class DegenerateDependenceWarning(UserWarning):
    """Dependence estimate at or beyond the supported boundary; value was clamped."""
