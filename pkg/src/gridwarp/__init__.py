"""Document image dewarping by grid-regularized quadratic energy
minimization, with TFI/TPS baselines and a synthetic verification
harness."""

from .core import (BackwardMap, GeometricElements, GridField, ImageBuffer,
                   Point2, Polyline, bilinear_weights, resample_polyline)
from .solver import SolverParams, solve_field

__all__ = [
    "BackwardMap", "GeometricElements", "GridField", "ImageBuffer",
    "Point2", "Polyline", "bilinear_weights", "resample_polyline",
    "SolverParams", "solve_field",
]

__version__ = "0.1.0"
