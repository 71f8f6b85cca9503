"""Hybrid high-order solver for anisotropic diffusion on skewed polygonal meshes.

A library plus CLI for the problem -div(K grad u) = f with Dirichlet data
on general polygonal meshes of the unit square, including strongly
stretched and nonconforming families, together with the analysis tools
(energy/H1/L2 errors, convergence rates, condition numbers, skewness
diagnostics) used by the benchmark cases A, B and C.
"""

from . import analysis, fields, hho, mesh, poly, system
from .analysis import (
    ErrorReport,
    SkewnessDiagnostics,
    compute_error_report,
    convergence_rates,
    energy_error,
    global_interpolate,
    h1_error,
    interplay_factor,
    l2_error,
    predicted_bound_factor,
    skewness_diagnostics,
    transported_tensor,
    verify_transport,
)
from .errors import (
    ConfigError,
    HHOError,
    MeshFormatError,
    MeshValidationError,
    SolverError,
)
from .fields import (
    CosineSolution,
    DiffusionField,
    PolynomialSolution,
    Solution,
    source_from_solution,
)
from .hho import (
    ElementContext,
    LocalDofVector,
    LocalOperatorSet,
    build_difference_ops,
    build_local_bilinear,
    build_reconstruction,
    build_stabilization,
    elliptic_projector,
    interpolate_local,
    local_seminorm,
)
from .mesh import (
    CellView,
    Mesh,
    SkewMap,
    d_TF,
    estimate_skew_map,
    flatness,
    generate_cartesian,
    generate_hexagonal,
    generate_locally_refined,
    load_mesh,
    save_native,
)
from .poly import (
    CellBasis,
    EdgeBasis,
    Poly1D,
    Poly2D,
    QuadRule,
    cell_quadrature,
    edge_normal_flux_matrix,
    edge_quadrature,
    l2_project_cell,
    l2_project_edge,
    weighted_stiffness,
)
from .system import (
    CondensedSystem,
    DofMap,
    assemble,
    assemble_full,
    condition_number_1norm,
    recover_cells,
    solve,
    solve_full,
)

__version__ = "0.1.0"
