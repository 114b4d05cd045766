"""Symmetry diagnostics for discrete torsion functions.

The central object is the Soap-Bubble deficit

    I_p(u) = integral of |grad u|^(p-2) ||(I + (p-2) n n^T) D2u||_F^2
             - (div(|grad u|^(p-2) grad u))^2 / (N |grad u|^(p-2))

which is pointwise nonnegative (matrix Cauchy-Schwarz on the diagonal) and
vanishes exactly when the domain is a ball.  Around it: the volume/boundary
flux identity, the curvature-weighted upper bounds, the a priori stability
bound, the a priori gradient bounds, and the ball-equivalence deviation
panel.  Cells where |grad u| falls under a relative threshold delta_crit are
excluded from the degenerate-weight integrals and their area is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closed_forms import gradient_bounds, stability_prefactor
from .errors import InvalidDomainError
from .geometry import BoundaryCurve, GeometricSummary
from .kernels import active as K
from .kernels import backend_name
from .meshing import Mesh
from .recovery import RecoveredField, boundary_flux, recover
from .solver import FemSpace, Solution

DELTA_CRIT_DEFAULT = 1e-3

# Ball-classification tolerance: discretization noise in the ball-degenerate
# diagnostics scales like C*h on these meshes.  The binding quantity is the
# volume side of the flux identity, whose recovered third-derivative term
# reaches |LHS| ~ 0.26 h on the disk at h = 0.05 (worst p); the deficit
# itself stays below 0.011 h at every level measured.  C = 0.4 covers the
# worst case with a 1.5x margin.  The absolute floor covers tiny h.
TOL_DEFICIT_SLOPE = 0.4
TOL_DEFICIT_FLOOR = 1e-3


def tol_deficit(h: float) -> float:
    """Deficit threshold below which a discrete solution counts as radial."""
    return max(TOL_DEFICIT_FLOOR, TOL_DEFICIT_SLOPE * h)


def newton_gap(a) -> float:
    """||A||_F^2 - tr(A)^2/n for a square matrix; nonnegative, zero iff A
    is a scalar multiple of the identity."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("newton_gap needs a square matrix")
    n = a.shape[0]
    return float(np.sum(a * a) - np.trace(a) ** 2 / n)


def p_function(values: np.ndarray, rec: RecoveredField, p: float,
               dim: int = 2) -> np.ndarray:
    """Nodal P-function 2(p-1)/p |grad u|^p + 2u/dim (vertex gradients)."""
    gmag = np.hypot(rec.vert_gx, rec.vert_gy)
    return 2.0 * (p - 1.0) / p * gmag ** p + 2.0 * values / dim


def p_normal_quotients(sol: Solution, rec: RecoveredField,
                       traces: "BoundaryTraces | None" = None) -> np.ndarray:
    """Outward difference quotient of the P-function at each boundary edge.

    Compares P at the edge midpoint with P at the off-edge vertex of the
    adjacent triangle, divided by the normal offset.  On the boundary u = 0
    and the tangential derivative vanishes, so P there is evaluated from the
    flux-recovered normal derivative; the vertex-gradient estimate is one
    ring deep and biased low by O(h), which the O(h) depth would amplify
    to O(1).
    """
    mesh, p = sol.mesh, sol.config.p
    dim = 2
    if traces is None:
        traces = boundary_traces(sol, rec)
    pf = p_function(sol.values, rec, p, dim)
    b = mesh.boundary
    tri = mesh.triangles[b.tri]
    off = np.empty(len(b), dtype=np.int64)
    for k in range(3):
        sel = (tri[:, k] != b.v0) & (tri[:, k] != b.v1)
        off[sel] = tri[sel, k]
    mid = 0.5 * (mesh.points[b.v0] + mesh.points[b.v1])
    step = mid - mesh.points[off]
    depth = step[:, 0] * b.normal[:, 0] + step[:, 1] * b.normal[:, 1]
    p_mid = 2.0 * (p - 1.0) / p * np.abs(traces.u_nu) ** p
    return (p_mid - pf[off]) / depth


# ---------------------------------------------------------------------------
# boundary traces


@dataclass
class BoundaryTraces:
    """Per-boundary-edge samples at arc midpoints."""

    arc: np.ndarray          # quadrature weights
    component: np.ndarray
    t_mid: np.ndarray
    u_nu: np.ndarray         # flux-recovered normal derivative (negative)
    u_nu_raw: np.ndarray     # adjacent-triangle gradient dotted with the normal
    u_nunu: np.ndarray       # second normal derivative from recovered Hessians
    curvature: np.ndarray    # exact curve curvature at t_mid
    p: float
    dim: int

    def deltap_residual(self) -> float:
        """Max |1 + |u_nu|^(p-2) ((p-1) u_nunu + (dim-1) H u_nu)| over edges;
        measures how well the recovered traces satisfy the equation on the
        boundary (dominated by the u_nunu recovery error)."""
        w = np.abs(self.u_nu) ** (self.p - 2.0)
        r = w * ((self.p - 1.0) * self.u_nunu
                 + (self.dim - 1.0) * self.curvature * self.u_nu)
        return float(np.max(np.abs(r + 1.0)))


def boundary_traces(sol: Solution, rec: RecoveredField) -> BoundaryTraces:
    mesh, fem, p = sol.mesh, sol.fem, sol.config.p
    b = mesh.boundary
    bverts, unu_vertex = boundary_flux(fem, sol.values, p, sol.config.eps_min)
    q = np.zeros(mesh.n_vertices)
    q[bverts] = np.abs(unu_vertex) ** (p - 1.0)
    q_mid = 0.5 * (q[b.v0] + q[b.v1])
    u_nu = -(q_mid ** (1.0 / (p - 1.0)))

    gx, gy = rec.tri_gx[b.tri], rec.tri_gy[b.tri]
    u_nu_raw = gx * b.normal[:, 0] + gy * b.normal[:, 1]

    nx, ny = b.normal[:, 0], b.normal[:, 1]
    hxx = 0.5 * (rec.hxx[b.v0] + rec.hxx[b.v1])
    hxy = 0.5 * (rec.hxy[b.v0] + rec.hxy[b.v1])
    hyy = 0.5 * (rec.hyy[b.v0] + rec.hyy[b.v1])
    u_nunu = hxx * nx * nx + 2.0 * hxy * nx * ny + hyy * ny * ny

    kap = np.empty(len(b))
    for ci in range(int(np.max(b.component)) + 1):
        sel = b.component == ci
        kap[sel] = mesh_curve_curvature(sol, ci, b.t_mid[sel])

    return BoundaryTraces(arc=b.arc, component=b.component, t_mid=b.t_mid,
                          u_nu=u_nu, u_nu_raw=u_nu_raw, u_nunu=u_nunu,
                          curvature=kap, p=p, dim=2)


def mesh_curve_curvature(sol: Solution, component: int, t):
    curve = getattr(sol, "_curve", None)
    if curve is None:
        raise InvalidDomainError("solution lacks an attached boundary curve")
    return curve.components[component].curvature(t)


# ---------------------------------------------------------------------------
# volume integrals


@dataclass
class DeficitResult:
    value: float
    excluded_area: float
    excluded_fraction: float
    delta_crit: float
    mask: np.ndarray
    cell_integrand: np.ndarray
    cell_deltap: np.ndarray


def soap_bubble_deficit(fem: FemSpace, rec: RecoveredField, p: float,
                        delta_crit: float = DELTA_CRIT_DEFAULT,
                        dim: int = 2) -> DeficitResult:
    gn = np.hypot(rec.tri_gx, rec.tri_gy)
    thresh = delta_crit * float(np.max(gn))
    mask = gn > thresh
    integrand, deltap = K.deficit_terms(fem.tri, rec.tri_gx, rec.tri_gy,
                                        rec.hxx, rec.hxy, rec.hyy, p,
                                        float(dim), mask)
    total_area = float(np.sum(fem.area))
    excluded = float(np.sum(fem.area[~mask]))
    return DeficitResult(
        value=float(np.sum(fem.area * integrand)),
        excluded_area=excluded,
        excluded_fraction=excluded / total_area,
        delta_crit=delta_crit,
        mask=mask,
        cell_integrand=integrand,
        cell_deltap=deltap,
    )


@dataclass
class IdentityResult:
    lhs: float               # volume integral of the identity integrand
    rhs: float               # boundary integral -(dim-1) (u_nu/dim + H |u_nu|^p)
    rel_gap: float
    rhs_recoded: float       # independently coded evaluation of the same trace formula
    crosscheck_rel: float    # |rhs - rhs_recoded| relative
    rhs_pnu_route: float     # P-function flux route using recovered u_nunu
    pnu_route_rel: float


def flux_identity(fem: FemSpace, rec: RecoveredField, traces: BoundaryTraces,
                  mask: np.ndarray, p: float, dim: int = 2) -> IdentityResult:
    cells = K.identity_terms(fem.tri, rec.tri_gx, rec.tri_gy,
                             rec.hxx, rec.hxy, rec.hyy,
                             rec.lap_gx, rec.lap_gy, p, float(dim), mask)
    lhs = float(np.sum(fem.area * cells))

    unu, H, wgt = traces.u_nu, traces.curvature, traces.arc
    rhs = -(dim - 1.0) * float(np.sum(wgt * (unu / dim + H * np.abs(unu) ** p)))

    # cross-check: the same boundary integral assembled through the
    # P-function flux, substituting the equation value for the p-Laplacian
    acc = 0.0
    for k in range(len(wgt)):
        w = math.pow(abs(unu[k]), p - 2.0)
        pn = 2.0 * unu[k] * (-1.0 + 1.0 / dim
                             - (dim - 1.0) * H[k] * w * unu[k])
        acc += wgt[k] * pn
    rhs_recoded = 0.5 * acc

    # P-function normal derivative via the recovered second normal derivative
    wmag = np.abs(unu) ** (p - 2.0)
    pnu = 2.0 * unu * ((p - 1.0) * wmag * traces.u_nunu + 1.0 / dim)
    rhs_pnu = 0.5 * float(np.sum(wgt * pnu))

    def relgap(x, y):
        s = max(abs(x), abs(y))
        return abs(x - y) / s if s > 0 else 0.0

    rel_gap = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30)
    return IdentityResult(lhs=lhs, rhs=rhs, rel_gap=rel_gap,
                          rhs_recoded=rhs_recoded,
                          crosscheck_rel=relgap(rhs, rhs_recoded),
                          rhs_pnu_route=rhs_pnu,
                          pnu_route_rel=relgap(rhs, rhs_pnu))


# ---------------------------------------------------------------------------
# bounds and the deviation panel


@dataclass
class ChainBounds:
    bound_ii: float          # -(p(dim-1)/(p-1)) * integral (u_nu/dim + H|u_nu|^p)
    bound_iii: float         # (p(dim-1)/(p-1)) * integral |u_nu|^p (H0 - H)
    stability: float         # geometric prefactor * L1 curvature deviation
    h_l1_dev: float


def chain_bounds(traces: BoundaryTraces, summary: GeometricSummary,
                 p: float, dim: int = 2) -> ChainBounds:
    unu, H, wgt = traces.u_nu, traces.curvature, traces.arc
    coef = p * (dim - 1.0) / (p - 1.0)
    b2 = -coef * float(np.sum(wgt * (unu / dim + H * np.abs(unu) ** p)))
    b3 = coef * float(np.sum(wgt * np.abs(unu) ** p * (summary.H0 - H)))
    pref = stability_prefactor(p, dim, summary.rho_e, summary.diameter)
    return ChainBounds(bound_ii=b2, bound_iii=b3,
                       stability=pref * summary.curvature_l1_dev,
                       h_l1_dev=summary.curvature_l1_dev)


def curvature_mass_check(curve: BoundaryCurve,
                         summary: GeometricSummary | None = None
                         ) -> tuple[float, float]:
    """Total boundary curvature against its constant-curvature ceiling.

    Returns (integral of H over the boundary, H0 * perimeter); the first is
    2 pi for any simple closed loop, the second equals perimeter^2 / (dim *
    area) and matches it exactly when the boundary is a circle.
    """
    if len(curve.components) != 1:
        raise InvalidDomainError(
            "curvature mass bound applies to a single boundary loop")
    summary = summary or curve.summary()
    mass = curve.total_curvature(0)
    return mass, summary.H0 * summary.perimeter


def chain_violations(ip: float, bounds: ChainBounds, tol: float) -> list:
    """Inequalities of the deficit chain that fail beyond tol."""
    out = []
    if ip < -tol:
        out.append("deficit_negative")
    if ip > bounds.bound_ii + tol:
        out.append("deficit_exceeds_bound_ii")
    if ip > bounds.bound_iii + tol:
        out.append("deficit_exceeds_bound_iii")
    if bounds.bound_iii > bounds.stability + tol:
        out.append("bound_iii_exceeds_stability")
    return out


@dataclass
class SbtPanel:
    """Deviations from the five equivalent ball characterizations; all
    vanish together exactly on a ball."""

    dev_a: float   # isoperimetric deficit perimeter^2/(4 pi area) - 1
    dev_b: float   # worst boundary deviation of |u_nu|^(p-2) u_nu from -1/(dim H)
    dev_c: float   # radiality deficit of the solution (= I_p)
    dev_d: float   # arc-weighted standard deviation of H
    dev_e: float   # worst boundary deviation of |grad u| from the ball value

    def to_dict(self):
        return {"dev_a": self.dev_a, "dev_b": self.dev_b, "dev_c": self.dev_c,
                "dev_d": self.dev_d, "dev_e": self.dev_e}


def sbt_panel(values: np.ndarray, rec: RecoveredField, traces: BoundaryTraces,
              summary: GeometricSummary, mesh: Mesh, ip: float, p: float,
              dim: int = 2) -> SbtPanel:
    if summary.n_components != 1:
        raise InvalidDomainError(
            "ball-equivalence panel is defined for simply connected domains only")
    dev_a = summary.perimeter ** 2 / (4.0 * math.pi * summary.area) - 1.0

    # flux against the reciprocal curvature; skip exact zero-curvature
    # samples, where the deviation is unbounded by definition
    unu, H = traces.u_nu, traces.curvature
    wmag = np.abs(unu) ** (p - 2.0)
    live = np.abs(H) > 1e-12
    dev_b = float(np.max(np.abs(wmag[live] * unu[live]
                                + 1.0 / (dim * H[live]))))

    dev_c = ip

    dev_d = summary.curvature_std

    ball_grad = (1.0 / (dim * summary.H0)) ** (1.0 / (p - 1.0))
    dev_e = float(np.max(np.abs(np.abs(unu) - ball_grad)))

    return SbtPanel(dev_a=dev_a, dev_b=dev_b, dev_c=dev_c, dev_d=dev_d, dev_e=dev_e)


# ---------------------------------------------------------------------------
# full report


@dataclass
class DeficitReport:
    p: float
    domain: dict
    h: float
    I_p: float
    tol: float
    excluded_area: float
    excluded_fraction: float
    delta_crit: float
    identity: IdentityResult
    bounds: ChainBounds
    grad_lower: float
    grad_upper: float
    grad_min_obs: float
    grad_max_obs: float
    H0: float
    R0: float
    curvature_mass: float        # integral of H over the boundary
    curvature_mass_bound: float  # H0 * perimeter
    sbt: SbtPanel | None
    summary: GeometricSummary
    deltap_residual: float
    violations: list
    status: str
    flags: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        d = {
            "p": self.p,
            "domain": self.domain,
            "h": self.h,
            "I_p": self.I_p,
            "excluded_area": self.excluded_area,
            "identity": {"lhs": self.identity.lhs, "rhs": self.identity.rhs,
                         "rel_gap": self.identity.rel_gap},
            "bound_ii": self.bounds.bound_ii,
            "bound_iii": self.bounds.bound_iii,
            "stability_bound": self.bounds.stability,
            "H0": self.H0,
            "R0": self.R0,
            "H_L1_dev": self.bounds.h_l1_dev,
            "grad_bounds": {"lower": self.grad_lower, "upper": self.grad_upper,
                            "min_observed": self.grad_min_obs,
                            "max_observed": self.grad_max_obs},
            "sbt": self.sbt.to_dict() if self.sbt is not None else "unsupported",
            "status": self.status,
            # informational extras (stable too, but not part of the core schema)
            "tol_deficit": self.tol,
            "delta_crit": self.delta_crit,
            "excluded_fraction": self.excluded_fraction,
            "identity_crosscheck_rel": self.identity.crosscheck_rel,
            "identity_pnu_route_rel": self.identity.pnu_route_rel,
            "deltap_residual": self.deltap_residual,
            "curvature_mass": self.curvature_mass,
            "curvature_mass_bound": self.curvature_mass_bound,
            "rho_i": self.summary.rho_i,
            "rho_e": self.summary.rho_e,
            "rho_overridden": self.summary.rho_overridden,
            "violations": self.violations,
            "flags": self.flags,
            "backend": backend_name(),
        }
        return d


def analyze(sol: Solution, curve: BoundaryCurve,
            delta_crit: float = DELTA_CRIT_DEFAULT,
            summary: GeometricSummary | None = None,
            tol: float | None = None) -> DeficitReport:
    """Evaluate every diagnostic on a solved torsion problem.

    ``tol`` overrides the default mesh-derived chain tolerance tol_deficit(h).
    """
    sol._curve = curve
    p = sol.config.p
    mesh, fem = sol.mesh, sol.fem
    summary = summary or curve.summary()

    rec = recover(mesh, sol.values, fem)
    traces = boundary_traces(sol, rec)
    deficit = soap_bubble_deficit(fem, rec, p, delta_crit)
    identity = flux_identity(fem, rec, traces, deficit.mask, p)
    bounds = chain_bounds(traces, summary, p)
    lower, upper = gradient_bounds(p, 2, summary.rho_i, summary.rho_e,
                                   summary.diameter)
    gobs = np.abs(traces.u_nu)

    mass = sum(curve.total_curvature(ci) for ci in range(len(curve.components)))
    mass_bound = summary.H0 * summary.perimeter

    flags = []
    if bounds.bound_ii < 0:
        flags.append("bound_ii_negative")
    if tol is None:
        tol = tol_deficit(mesh.h)
    violations = chain_violations(deficit.value, bounds, tol)

    sbt = None
    if summary.n_components == 1:
        sbt = sbt_panel(sol.values, rec, traces, summary, mesh, deficit.value, p)

    status = "warning" if (deficit.excluded_fraction > 0.10 or flags) else "ok"
    return DeficitReport(
        p=p, domain=curve.spec.to_dict(), h=mesh.h,
        I_p=deficit.value, tol=tol,
        excluded_area=deficit.excluded_area,
        excluded_fraction=deficit.excluded_fraction,
        delta_crit=delta_crit,
        identity=identity, bounds=bounds,
        grad_lower=lower, grad_upper=upper,
        grad_min_obs=float(np.min(gobs)), grad_max_obs=float(np.max(gobs)),
        H0=summary.H0, R0=summary.R0,
        curvature_mass=mass, curvature_mass_bound=mass_bound,
        sbt=sbt, summary=summary,
        deltap_residual=traces.deltap_residual(),
        violations=violations, status=status, flags=flags,
    )
