"""Numerical checks of a dimensional transport-entropy inequality on spheres."""

__version__ = "0.1.0"

from .specfun import CostFunction, QuadraticCost, comparison_factors, cost, s_fn, sin_power_integral
from .sphere import SphereGrid, build_grid, distance_matrix, geodesic_distance
from .measures import DiscreteDensity, TestFunction, dim_entropy, kl_entropy, make_density
from .transport import (TransportPlan, cost_matrix, dual_objective, inf_convolution, solve_entropic,
                        solve_exact)

__all__ = [
    "CostFunction", "QuadraticCost", "comparison_factors", "cost", "s_fn", "sin_power_integral",
    "SphereGrid", "build_grid", "distance_matrix", "geodesic_distance",
    "DiscreteDensity", "TestFunction", "dim_entropy", "kl_entropy", "make_density",
    "TransportPlan", "cost_matrix", "dual_objective", "inf_convolution", "solve_entropic", "solve_exact",
]
