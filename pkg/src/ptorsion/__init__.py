"""Numerical laboratory for the p-Laplacian torsion problem on planar domains.

Solves -div(|grad u|^(p-2) grad u) = 1 with zero boundary data for
1 < p <= 2 on smooth domains, and evaluates the symmetry diagnostics that
detect how far a domain is from a ball: the Soap-Bubble deficit, the
associated integral identity, curvature-weighted boundary bounds, and
closed-form radial/annular reference solutions.
"""

from .closed_forms import (
    AnnulusTorsion,
    RadialTorsion,
    comparison_envelopes,
    find_rbar,
    gradient_bounds,
    radial_p_function,
    stability_prefactor,
)
from .diagnostics import (
    DELTA_CRIT_DEFAULT,
    BoundaryTraces,
    ChainBounds,
    DeficitReport,
    DeficitResult,
    IdentityResult,
    SbtPanel,
    analyze,
    boundary_traces,
    chain_bounds,
    chain_violations,
    curvature_mass_check,
    flux_identity,
    newton_gap,
    p_function,
    p_normal_quotients,
    sbt_panel,
    soap_bubble_deficit,
    tol_deficit,
)
from .errors import (
    DegenerateGeometryError,
    InvalidDomainError,
    MeshError,
    MeshFormatError,
    NonDifferentiableError,
    PTorsionError,
    QuadratureError,
    RecoveryError,
    SolverError,
    SolverFailureFlag,
)
from .geometry import (
    BoundaryCurve,
    DomainSpec,
    GeometricSummary,
    Measures,
    build_boundary,
    reference_constants,
)
from .kernels import available_backends, backend_name
from .meshing import Mesh, load_mesh, save_mesh, triangulate
from .recovery import RecoveredField, boundary_flux, recover
from .solver import (
    FemSpace,
    SolveConfig,
    Solution,
    load_solution,
    residual_check,
    save_solution,
    solve_torsion,
)

__version__ = "0.1.0"
