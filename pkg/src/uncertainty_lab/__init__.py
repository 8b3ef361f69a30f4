"""Numerical laboratory for uncertainty principles of band-limited functions on the torus."""

from .kernels import BACKEND
from .torus import (
    BandLimitedFunction,
    BandSpec,
    TorusGeometry,
    analyze,
    lp_norm,
    modulate,
    partial_derivative,
    random_band_limited,
    synthesize,
)

__all__ = [
    "BACKEND",
    "BandLimitedFunction",
    "BandSpec",
    "TorusGeometry",
    "analyze",
    "lp_norm",
    "modulate",
    "partial_derivative",
    "random_band_limited",
    "synthesize",
]

__version__ = "0.1.0"
