"""Spectral experiments on weighted decay for the Zakharov-Kuznetsov and KdV equations."""

from .spectral import ConeVector, Field, Grid, make_grid
from .evolve import GroundStateSolver, SolverConfig, SpectralSolver, ground_state
from .weights import CutoffFamily, ExpWeightFamily, truncated_weight

__version__ = "0.1.0"

__all__ = [
    "ConeVector",
    "CutoffFamily",
    "ExpWeightFamily",
    "Field",
    "Grid",
    "GroundStateSolver",
    "SolverConfig",
    "SpectralSolver",
    "ground_state",
    "make_grid",
    "truncated_weight",
]
