"""Monotone-subsequence geometry and limit surfaces of locally uniform
random permutations: sampling, watermelon extraction, staircase surfaces,
the variational functional and its maximization, and the continuity
smoothing operator."""

__version__ = "0.1.0"

from .geometry import (
    DensityModel,
    PlanarPoint,
    PointSet,
    RectangleSpec,
    as_permutation,
    sample_iid,
    sample_poisson_rectangle,
    subseed,
)
from .tableau import (
    StaircaseFunction,
    YoungShape,
    eval_kappa,
    greene_k_decreasing_size,
    kappa_surface,
    lds_length,
    lis_length,
    rsk_shape,
)
from .watermelon import (
    WatermelonResult,
    coverage_profile,
    max_k_decreasing,
    peel_heuristic,
    verify,
)

__all__ = [
    "DensityModel", "PlanarPoint", "PointSet", "RectangleSpec",
    "as_permutation", "sample_iid", "sample_poisson_rectangle", "subseed",
    "StaircaseFunction", "YoungShape", "eval_kappa",
    "greene_k_decreasing_size", "kappa_surface", "lds_length", "lis_length",
    "rsk_shape",
    "WatermelonResult", "coverage_profile", "max_k_decreasing",
    "peel_heuristic", "verify",
]
