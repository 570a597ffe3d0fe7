"""Heat equation on Sierpinski simplices: Laplacian assembly, spectral
decimation and explicit/implicit Euler time stepping."""
from ._backend import kernels
from .errors import (
    CFLViolation, DivergenceError, DomainError, FractalHeatError, SolverError,
    StateError, UnsupportedFamilyError,
)
from .laplacian import assemble, dirichlet_restrict, normalization, restricted_laplacian
from .spectral import cfl_max_step, decimation_spectrum, direct_spectrum, smallest_eigenvalue
from .stepper import SchemeConfig, StateVector, simulate, spike_initial
from .topology import SimplexSpec, corner_index, fusion_pairs, vertex_count

BACKEND = kernels.NAME

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CFLViolation", "DivergenceError", "DomainError", "FractalHeatError",
    "SchemeConfig", "SimplexSpec", "SolverError", "StateError", "StateVector",
    "UnsupportedFamilyError", "assemble", "cfl_max_step", "corner_index",
    "decimation_spectrum", "direct_spectrum", "dirichlet_restrict", "fusion_pairs",
    "normalization", "restricted_laplacian", "simulate", "smallest_eigenvalue",
    "spike_initial", "vertex_count",
]
