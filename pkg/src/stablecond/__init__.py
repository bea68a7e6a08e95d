"""Stable processes conditioned to hit ``[-1, 1]`` continuously.

Harmonic functions, Green function, hitting laws and Monte Carlo tools for a
one-dimensional stable process killed on entering the interval.
"""
from .stable_model import RngStream, StableParams, validate_params
from .harmonic import HKind, v1, v_minus1, v_total, green_u

__version__ = "0.1.0"

__all__ = [
    "RngStream",
    "StableParams",
    "validate_params",
    "HKind",
    "v1",
    "v_minus1",
    "v_total",
    "green_u",
]
