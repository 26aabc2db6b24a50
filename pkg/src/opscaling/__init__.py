"""Operator scaling toolkit: non-commutative singularity, nc-rank, capacity, identity testing."""

from .exact_linalg import NumericMode, RationalMatrix
from .cp_operator import CPOperator
from .scaling_core import ScalingConfig, ScalingRun, approx_capacity, run_fullness_test

__all__ = [
    "NumericMode",
    "RationalMatrix",
    "CPOperator",
    "ScalingConfig",
    "ScalingRun",
    "approx_capacity",
    "run_fullness_test",
]

__version__ = "0.1.0"
