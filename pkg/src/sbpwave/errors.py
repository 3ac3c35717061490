"""Exception types shared across the package."""


class SbpwaveError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SbpwaveError):
    """Invalid or inconsistent configuration values."""


class DimensionError(SbpwaveError):
    """Array or operator dimension mismatch."""


class FoldedMeshError(SbpwaveError):
    """Coordinate map with non-positive Jacobian."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TopologyError(SbpwaveError):
    """Bad multiblock topology: unmatched or non-conforming edges."""


class ConstraintRankError(SbpwaveError):
    """Singular constraint Gram matrix (duplicated constraints)."""


class UnsupportedSourceError(SbpwaveError):
    """Point source or receiver placed outside the fixed blocks."""


class NumericalError(SbpwaveError):
    """Numerical failure (non-convergence, NaN/Inf) with context."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
