"""Exception types raised across the package."""


class ProjSymError(Exception):
    """Base class for all errors raised by projsym."""


class DimensionMismatch(ProjSymError, ValueError):
    pass


class ZeroVector(ProjSymError, ValueError):
    """Raised when a direction is requested from a zero vector."""


class RankDeficient(ProjSymError, ValueError):
    """Raised by Gram-Schmidt when a column is numerically dependent on the previous ones.

    ``column`` is 1-based, matching the usual e_1 ... e_m labelling.
    """

    def __init__(self, column, residual=None):
        self.column = column
        self.residual = residual
        msg = f"column {column} is numerically dependent on the preceding columns"
        if residual is not None:
            msg += f" (relative residual {residual:.3g})"
        super().__init__(msg)


class BadBlock(ProjSymError, ValueError):
    """Raised when a rotation block is not special orthogonal."""


class AxisMismatch(ProjSymError, ValueError):
    pass


class TooFewSamples(ProjSymError, ValueError):
    pass
