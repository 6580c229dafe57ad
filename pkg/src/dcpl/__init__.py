"""Discrete conformal PL-maps on triangular lattices: solver, layout and convergence checks."""

from .analytic import ConformalMap, builtin_maps, get_map, predicted_constant
from .lattice import Disc, LatticeSpec, Polygon, Subcomplex, build_lattice_patch
from .layout import Normalization, PLMap, layout
from .solver import SolveResult, SolverOptions, solve_dirichlet

__version__ = "0.1.0"

__all__ = [
    "ConformalMap",
    "builtin_maps",
    "get_map",
    "predicted_constant",
    "Disc",
    "LatticeSpec",
    "Polygon",
    "Subcomplex",
    "build_lattice_patch",
    "Normalization",
    "PLMap",
    "layout",
    "SolveResult",
    "SolverOptions",
    "solve_dirichlet",
]
