"""Extrinsic location statistics on compact submanifolds of Euclidean space."""
from ._backend import BACKEND
from .estimators import (
    LabeledSample,
    MedianSolverConfig,
    covariance,
    mean_vector,
    pooled_mean_and_scale,
    spatial_median,
)
from .geometry import Mode, Sphere, Stiefel, parse_manifold, sym_inv_sqrt, sym_sqrt
from .inference import (
    build_frame,
    circle_interval,
    confidence_region,
    multisample_mean_inference,
    one_sample_test,
    quadratic_statistic,
    two_sample_test,
)
from .limitdist import ChiSquare, StableZetaSq, reference_law

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChiSquare",
    "LabeledSample",
    "MedianSolverConfig",
    "Mode",
    "Sphere",
    "StableZetaSq",
    "Stiefel",
    "build_frame",
    "circle_interval",
    "confidence_region",
    "covariance",
    "mean_vector",
    "multisample_mean_inference",
    "one_sample_test",
    "parse_manifold",
    "pooled_mean_and_scale",
    "quadratic_statistic",
    "reference_law",
    "spatial_median",
    "sym_inv_sqrt",
    "sym_sqrt",
    "two_sample_test",
]
