"""Heat trace of killed isotropic stable processes: kernels, Monte Carlo and checks."""

from .errors import (ArgumentError, ConfigError, DomainError, GeometryError, LevyTraceError,
                     NumericError, RangeError)
from .exponent import ExponentModel, RenewalScale, ScalingCertificate, eval_psi
from .geometry import Ball, Box, GoodSetSpec, Polygon2D, Region, unit_square
from .heatkernel import KernelEvaluator, QuadratureOptions
from .simulate import PathConfig

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "ConfigError", "DomainError", "GeometryError", "LevyTraceError",
    "NumericError", "RangeError", "ExponentModel", "RenewalScale", "ScalingCertificate",
    "eval_psi", "Ball", "Box", "GoodSetSpec", "Polygon2D", "Region", "unit_square",
    "KernelEvaluator", "QuadratureOptions", "PathConfig",
]
