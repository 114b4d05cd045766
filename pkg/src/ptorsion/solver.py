"""P1 finite element solver for the torsion problem of the p-Laplacian.

Minimizes the regularized energy sum_T area_T/p (|grad u|^2 + eps^2)^(p/2)
minus the load term, with homogeneous Dirichlet data eliminated, by damped
Newton iteration inside an eps-continuation loop.  The per-triangle integrand
Hessian is SPD for eps > 0, so every Newton system is SPD and the Armijo
backtracking line search always makes progress.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .errors import (MeshFormatError, NonDifferentiableError, SolverError,
                     SolverFailureFlag)
from .kernels import active as K
from .kernels import backend_name
from .meshing import Mesh

P_RANGE_MESSAGE = "p must be in (1,2]"


@dataclass(frozen=True)
class SolveConfig:
    p: float
    eps0: float = 0.1
    eps_factor: float = 4.0
    eps_min: float = 1e-8
    tol_grad: float = 1e-9          # relative to the load-vector norm
    max_newton: int = 60            # per continuation stage
    armijo_c1: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if not (1.0 < self.p <= 2.0):
            raise SolverError(P_RANGE_MESSAGE + f", got {self.p}")
        if not (0 < self.eps_min <= self.eps0):
            raise SolverError("continuation needs 0 < eps_min <= eps0")
        if not self.eps_factor > 1:
            raise SolverError("eps_factor must exceed 1")
        if not self.tol_grad > 0:
            raise SolverError("tol_grad must be positive")

    def eps_schedule(self) -> list:
        if self.p == 2.0:
            # the weight is gradient-independent at p=2; one stage suffices
            return [self.eps_min]
        out = []
        eps = self.eps0
        while eps > self.eps_min:
            out.append(eps)
            eps /= self.eps_factor
        out.append(self.eps_min)
        return out

    def to_dict(self) -> dict:
        return {"p": self.p, "eps0": self.eps0, "eps_factor": self.eps_factor,
                "eps_min": self.eps_min, "tol_grad": self.tol_grad,
                "max_newton": self.max_newton, "armijo_c1": self.armijo_c1,
                "backtrack": self.backtrack}


@dataclass
class FemSpace:
    """Precomputed P1 assembly data for a mesh."""

    mesh: Mesh
    tri: np.ndarray
    area: np.ndarray
    bx: np.ndarray       # shape-function gradient x-components, (m, 3)
    by: np.ndarray
    load: np.ndarray     # lumped unit load over all nodes
    interior: np.ndarray  # boolean mask

    @staticmethod
    def build(mesh: Mesh) -> "FemSpace":
        pts = mesh.points
        tri = mesh.triangles
        p = pts[tri]
        x0, y0 = p[:, 0, 0], p[:, 0, 1]
        x1, y1 = p[:, 1, 0], p[:, 1, 1]
        x2, y2 = p[:, 2, 0], p[:, 2, 1]
        two_a = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        bx = np.stack([y1 - y2, y2 - y0, y0 - y1], axis=1) / two_a[:, None]
        by = np.stack([x2 - x1, x0 - x2, x1 - x0], axis=1) / two_a[:, None]
        area = 0.5 * two_a
        load = np.zeros(mesh.n_vertices)
        for k in range(3):
            np.add.at(load, tri[:, k], area / 3.0)
        return FemSpace(mesh=mesh, tri=tri, area=area,
                        bx=np.ascontiguousarray(bx), by=np.ascontiguousarray(by),
                        load=load, interior=~mesh.is_boundary_vertex)


def assemble_energy(fem: FemSpace, u: np.ndarray, p: float, eps: float) -> float:
    """Regularized energy; defined for eps >= 0."""
    if eps < 0:
        raise SolverError("regularization eps must be nonnegative")
    return K.energy_seminorm(fem.tri, fem.area, fem.bx, fem.by, u, p, eps) \
        - float(fem.load @ u)


def energy_gradient(fem: FemSpace, u: np.ndarray, p: float, eps: float) -> np.ndarray:
    """Nodal energy gradient over all nodes (interior rows are the residual)."""
    if eps == 0.0 and p < 2.0:
        gx, gy = K.tri_gradients(fem.tri, fem.bx, fem.by, u)
        if np.any(gx * gx + gy * gy == 0.0):
            raise NonDifferentiableError(
                "energy gradient does not exist: eps=0, p<2, and a triangle "
                "with vanishing gradient")
    return K.flux_assembly(fem.tri, fem.area, fem.bx, fem.by, u, p, eps,
                           fem.mesh.n_vertices) - fem.load


def _interior_hessian(fem: FemSpace, u: np.ndarray, p: float, eps: float):
    rows, cols, vals = K.hessian_entries(fem.tri, fem.area, fem.bx, fem.by, u, p, eps)
    idx = np.full(fem.mesh.n_vertices, -1, dtype=np.int64)
    ints = np.flatnonzero(fem.interior)
    idx[ints] = np.arange(len(ints))
    r, c = idx[rows], idx[cols]
    keep = (r >= 0) & (c >= 0)
    n = len(ints)
    return coo_matrix((vals[keep], (r[keep], c[keep])), shape=(n, n)).tocsc(), ints


@dataclass
class SolveInfo:
    stages: list
    iterations: int
    energy: float
    grad_rel: float
    eps_floor: float
    backend: str
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"stages": self.stages, "iterations": self.iterations,
                "energy": self.energy, "grad_rel": self.grad_rel,
                "eps_floor": self.eps_floor, "backend": self.backend}


@dataclass
class Solution:
    mesh: Mesh
    fem: FemSpace
    config: SolveConfig
    values: np.ndarray
    info: SolveInfo

    @property
    def max_value(self) -> float:
        return float(np.max(self.values))


def solve_torsion(mesh: Mesh, config: SolveConfig) -> Solution:
    fem = FemSpace.build(mesh)
    nv = mesh.n_vertices
    u = np.zeros(nv)
    load_norm = float(np.linalg.norm(fem.load[fem.interior]))
    if load_norm == 0:
        raise SolverError("mesh has no interior vertices")

    # Laplace solve as the continuation initializer
    H, ints = _interior_hessian(fem, u, 2.0, 1.0)
    u[ints] = splu(H).solve(fem.load[ints])

    p = config.p
    trace = []
    stages = []
    total_it = 0
    for eps in config.eps_schedule():
        grad_rel = math.inf
        for it in range(config.max_newton):
            g_full = energy_gradient(fem, u, p, eps)
            g = g_full[fem.interior]
            grad_rel = float(np.linalg.norm(g)) / load_norm
            if grad_rel <= config.tol_grad:
                break
            H, ints = _interior_hessian(fem, u, p, eps)
            delta = splu(H).solve(-g)
            slope = float(g @ delta)
            if not slope < 0:
                delta = -g
                slope = -float(g @ g)
            e0 = assemble_energy(fem, u, p, eps)
            # Rounding slack: near the minimum the true decrease drops below
            # the fp resolution of the energy sum; without the slack the
            # backtracking loop rejects every step and stalls.
            fp_slack = 1e-12 * (abs(e0) + 1e-300)
            alpha = 1.0
            while True:
                u_new = u.copy()
                u_new[ints] += alpha * delta
                e1 = assemble_energy(fem, u_new, p, eps)
                if e1 <= e0 + config.armijo_c1 * alpha * slope + fp_slack:
                    break
                alpha *= config.backtrack
                if alpha < 1e-14:
                    raise SolverError(
                        f"line search stagnated at eps={eps:g}, iteration {it}",
                        trace=trace)
            u = u_new
            total_it += 1
            trace.append({"eps": eps, "iter": it, "grad_rel": grad_rel,
                          "alpha": alpha, "energy": e1})
        else:
            raise SolverError(
                f"Newton did not reach tol_grad={config.tol_grad:g} within "
                f"{config.max_newton} iterations at eps={eps:g}", trace=trace)
        stages.append({"eps": eps, "iterations": it, "grad_rel": grad_rel})

    if float(np.min(u[fem.interior])) <= 0.0:
        raise SolverFailureFlag("maximum principle violated: nonpositive interior value")

    info = SolveInfo(stages=stages, iterations=total_it,
                     energy=assemble_energy(fem, u, p, config.eps_min),
                     grad_rel=grad_rel, eps_floor=config.eps_min,
                     backend=backend_name(), trace=trace)
    return Solution(mesh=mesh, fem=fem, config=config, values=u, info=info)


def residual_check(sol: Solution) -> float:
    """Recomputed relative interior residual at the final regularization."""
    g = energy_gradient(sol.fem, sol.values, sol.config.p, sol.config.eps_min)
    return float(np.linalg.norm(g[sol.fem.interior])
                 / np.linalg.norm(sol.fem.load[sol.fem.interior]))


# ---------------------------------------------------------------------------
# solution serialization


def save_solution(path: str, mesh: Mesh, values: np.ndarray) -> None:
    """CSV x,y,u per vertex; %.17g so a round trip is bit-identical."""
    with open(path, "w") as f:
        f.write("x,y,u\n")
        for (x, y), v in zip(mesh.points, values):
            f.write(f"{x:.17g},{y:.17g},{v:.17g}\n")


def load_solution(path: str, mesh: Mesh) -> np.ndarray:
    rows = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "x,y,u":
            raise MeshFormatError("expected header 'x,y,u'", path, 1)
        for ln, raw in enumerate(f, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise MeshFormatError(f"expected 3 columns, got {len(parts)}", path, ln)
            try:
                rows.append([float(v) for v in parts])
            except ValueError as e:
                raise MeshFormatError(f"unparseable value ({e})", path, ln) from None
    arr = np.asarray(rows)
    if len(arr) != mesh.n_vertices:
        raise MeshFormatError(
            f"solution has {len(arr)} rows but the mesh has {mesh.n_vertices} vertices",
            path, 0)
    if not np.array_equal(arr[:, :2], mesh.points):
        raise MeshFormatError("solution coordinates do not match the mesh", path, 0)
    return np.ascontiguousarray(arr[:, 2])


def solve_json_doc(sol: Solution, domain_label: str) -> dict:
    return {
        "domain": json.loads(domain_label),
        "h": sol.mesh.h,
        "n_vertices": sol.mesh.n_vertices,
        "n_triangles": sol.mesh.n_triangles,
        "config": sol.config.to_dict(),
        "max_u": sol.max_value,
        "residual": residual_check(sol),
        **sol.info.to_dict(),
    }


def write_solve_json(path: str, sol: Solution, domain_label: str) -> None:
    with open(path, "w") as f:
        json.dump(solve_json_doc(sol, domain_label), f, indent=2)
        f.write("\n")
