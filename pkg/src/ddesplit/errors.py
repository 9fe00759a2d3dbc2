"""Exception types raised by the solver layers."""


class DelaySplitError(Exception):
    """Base class for all package errors."""


class GridError(DelaySplitError, ValueError):
    """A step, grid or history argument that does not fit the history grid."""


class DimensionError(DelaySplitError, ValueError):
    """Spatial dimensions of two operands do not agree."""


class UnsupportedParameterError(DelaySplitError, ValueError):
    """Parameter combination for which no formula is available."""


class NumericalError(DelaySplitError, ArithmeticError):
    """Singular linear system or non-convergent fixed-point iteration."""


class NonFiniteError(NumericalError, ValueError):
    """A state component is NaN or infinite, from bad input or overflow."""
