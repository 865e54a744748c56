"""Parabolic and elliptic equations on finite weighted graphs."""
__version__ = "0.1.0"

from .graph import (DomainPartition, GraphError, WeightedGraph, example_graph, random_graph,  # noqa: E402
                    random_partition, read_graph, validate)
from .spectral import (EigenSystem, HeatKernel, dirichlet_eigensystem, full_eigensystem,  # noqa: E402
                       heat_kernel, neumann_eigensystem)
from .linear import (LinearParabolicProblem, TimeSeries, forcing_mode_integral, solve_cauchy,  # noqa: E402
                     solve_elliptic_shifted, solve_ibvp_dirichlet, solve_ibvp_neumann)
from .monotone import (Bracket, MonotoneResult, Reaction, SemilinearProblem,  # noqa: E402
                       cauchy_elliptic_monotone, elliptic_monotone, lipschitz_constant, parabolic_monotone)
from .dynamics import Classification, Scenario, integrate  # noqa: E402

__all__ = [
    "DomainPartition", "GraphError", "WeightedGraph", "example_graph", "random_graph", "random_partition",
    "read_graph", "validate", "EigenSystem", "HeatKernel", "dirichlet_eigensystem", "full_eigensystem",
    "heat_kernel", "neumann_eigensystem", "LinearParabolicProblem", "TimeSeries", "forcing_mode_integral",
    "solve_cauchy", "solve_elliptic_shifted", "solve_ibvp_dirichlet", "solve_ibvp_neumann", "Bracket",
    "MonotoneResult", "Reaction", "SemilinearProblem", "cauchy_elliptic_monotone", "elliptic_monotone",
    "lipschitz_constant", "parabolic_monotone", "Classification", "Scenario", "integrate",
]
