"""Exception types raised by the package."""


class BSRError(Exception):
    """Base class for all package errors."""


class InvalidTree(BSRError):
    pass


class FeatureOutOfRange(BSRError):
    pass


class ParseError(BSRError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownOperator(BSRError):
    pass


class NonPositiveScale(BSRError):
    pass


class NonPositiveVariance(BSRError):
    pass


class NonFiniteColumn(BSRError):
    """A tree evaluated to inf/nan somewhere on the data."""


class LengthMismatch(BSRError):
    pass


class DimensionError(BSRError):
    pass


class InvalidSite(BSRError):
    pass


class InitFailure(BSRError):
    pass


class NonPositivePrice(BSRError):
    pass


class ConfigError(BSRError):
    pass


class MissingColumn(BSRError):
    pass


class NonNumericCell(BSRError):
    def __init__(self, row, col, value):
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {col!r}")
        self.row = row
        self.col = col


class EmptyFile(BSRError):
    pass
