"""Numerical verification of a Penrose-type inequality on Schwarzschild slices."""

from .spacetime import DomainError, SpacetimePoint, TangentVector, christoffel, metric_components
from .mesh import ParameterGrid, SurfaceSample, build_grid, surface_area
from .extrinsic import dual_mean_curvature, killing_flux, mean_curvature_vector, null_expansion, null_frame
from .slices import Family, GateError, SurfaceSpec, build_from_spec, s0_root
from .harness import FamilySpec, InequalityReport, evaluate_surface, penrose_gap, penrose_lhs, penrose_rhs

__version__ = "0.1.0"

__all__ = [
    "DomainError", "SpacetimePoint", "TangentVector", "christoffel", "metric_components",
    "ParameterGrid", "SurfaceSample", "build_grid", "surface_area",
    "dual_mean_curvature", "killing_flux", "mean_curvature_vector", "null_expansion", "null_frame",
    "Family", "GateError", "SurfaceSpec", "build_from_spec", "s0_root",
    "FamilySpec", "InequalityReport", "evaluate_surface", "penrose_gap", "penrose_lhs", "penrose_rhs",
]
