"""Monge-Ampere Dirichlet, eigenvalue and coupled-system solvers on convex
2-D domains, plus a verification suite for the identities and inequalities
the solutions must satisfy."""

__version__ = "0.1.0"

from .geometry import (
    ConvexDomain,
    ConvexPolygon,
    Disk,
    Ellipse,
    Grid,
    GridError,
    Rectangle,
    apply_unimodular,
    area,
    boundary_distance,
    boundary_fraction,
    build_grid,
    contains,
    diameter,
)
from .operators import (
    ScalarField,
    StencilSet,
    central_hessian,
    default_stencil,
    is_discretely_convex,
    laplacian,
    ma_det,
    second_difference,
)
from .dirichlet import ConvergenceError, SolverConfig, residual_sup, solve_dirichlet
from .spectral import (
    EigenPair,
    SpectralConfig,
    SystemSolution,
    rayleigh_quotient,
    scaling_map,
    solve_eigen,
    solve_system,
    sweep_p,
)
from .verification import (
    CheckReport,
    cd1_invariant,
    check_amgm,
    check_minkowski_det,
    check_nibp,
    check_uvn_identity,
    distance_bound_report,
    sup_bound_report,
    uniqueness_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
