"""Energy-stable SBP finite differences for acoustic shape optimization.

High-order multiblock curvilinear wave propagation with an adjoint-state
gradient engine and BFGS driver, plus the three reference experiments
(convergence study, bathymetry reconstruction, horn flare optimization).
"""

from .errors import (
    ConfigurationError,
    ConstraintRankError,
    DimensionError,
    FoldedMeshError,
    NumericalError,
    SbpwaveError,
    TopologyError,
    UnsupportedSourceError,
)
from .operators import (
    SbpOperatorSet1D,
    SbpSecondDerivative1D,
    build_first_derivative,
    build_second_derivative,
    build_time_quadrature,
)

__version__ = "0.1.0"

__all__ = [
    "SbpwaveError",
    "ConfigurationError",
    "DimensionError",
    "FoldedMeshError",
    "TopologyError",
    "ConstraintRankError",
    "UnsupportedSourceError",
    "NumericalError",
    "SbpOperatorSet1D",
    "SbpSecondDerivative1D",
    "build_first_derivative",
    "build_second_derivative",
    "build_time_quadrature",
    "__version__",
]
