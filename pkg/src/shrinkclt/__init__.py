"""Central limit experiments for soft-thresholded stationary sequences."""

__version__ = "0.1.0"

from .shrink import shrink, shrink_magnitude  # noqa: E402
from .marginals import (  # noqa: E402
    Laplace,
    Normal,
    PointMass,
    StandardNormal,
    StudentT,
    ZeroInflatedNormal,
    g_function,
)
from .processes import CancellationChain, GaussianAR1, IID, MovingAverage  # noqa: E402

__all__ = [
    "shrink", "shrink_magnitude", "g_function",
    "Normal", "StandardNormal", "Laplace", "StudentT", "ZeroInflatedNormal", "PointMass",
    "IID", "GaussianAR1", "MovingAverage", "CancellationChain",
]
