"""Sparse linear arrays, difference co-arrays and l1-based DOA estimation."""

__version__ = "0.1.0"

from .coarray import Coarray, CoarrayStats, array_stats, difference_coarray, enumerate_configs, verify_thinning
from .estimation import AngularGrid, SpectrumEstimate, cs_spectrum, extract_doas, rmse
from .geometry import Family, SensorArray, conventional_coprime, nested, thinned_coprime
from .solver import L1Problem, SolverOptions, solve_bpdn

__all__ = [
    "AngularGrid",
    "Coarray",
    "CoarrayStats",
    "Family",
    "L1Problem",
    "SensorArray",
    "SolverOptions",
    "SpectrumEstimate",
    "array_stats",
    "conventional_coprime",
    "cs_spectrum",
    "difference_coarray",
    "enumerate_configs",
    "extract_doas",
    "nested",
    "rmse",
    "solve_bpdn",
    "thinned_coprime",
    "verify_thinning",
]
