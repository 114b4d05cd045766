"""Timing comparison of the numpy and numba kernel backends.

Runs every hot kernel on identical inputs built from a disk mesh with the
closed-form torsion profile as nodal data, checks that the two backends
agree, and reports min-over-repeats wall times.

    python benchmarks/bench_kernels.py --h 0.02 --p 1.5 --repeats 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from scipy.sparse import coo_matrix

from ptorsion.closed_forms import RadialTorsion
from ptorsion.geometry import DomainSpec, build_boundary
from ptorsion.kernels import numpy_backend
from ptorsion.kernels import numba_backend as _maybe_numba
from ptorsion.meshing import triangulate
from ptorsion.recovery import (
    _adjacency,
    _boundary_distance,
    _lap_grad_patches,
    _patch_csr,
    _patch_scale,
)
from ptorsion.solver import FemSpace


def build_inputs(h: float, p: float):
    curve = build_boundary(DomainSpec.disk(1.0))
    mesh = triangulate(curve, h)
    fem = FemSpace.build(mesh)
    u = np.ascontiguousarray(RadialTorsion(p, 2, 1.0).value(mesh.points))

    neigh = _adjacency(mesh)
    depth = np.where(mesh.is_boundary_vertex, 2, 1)
    indptr, indices = _patch_csr(mesh, neigh, depth)
    scale = _patch_scale(mesh, indptr, indices)
    bdist = _boundary_distance(mesh, neigh)
    indptr_l, indices_l = _lap_grad_patches(mesh, neigh, bdist)
    scale_l = _patch_scale(mesh, indptr_l, indices_l)

    x = np.ascontiguousarray(mesh.points[:, 0])
    y = np.ascontiguousarray(mesh.points[:, 1])
    gx, gy = numpy_backend.tri_gradients(fem.tri, fem.bx, fem.by, u)
    hxx, hxy, hyy, _ = numpy_backend.quadratic_fit(indptr, indices, x, y, u, scale)
    lap = hxx + hyy
    lx, ly, _ = numpy_backend.linear_fit(indptr_l, indices_l, x, y, lap, scale_l)
    mask = gx * gx + gy * gy > 1e-6

    eps = 1e-6
    nv = mesh.n_vertices
    cases = [
        ("tri_gradients", (fem.tri, fem.bx, fem.by, u)),
        ("energy_seminorm", (fem.tri, fem.area, fem.bx, fem.by, u, p, eps)),
        ("flux_assembly", (fem.tri, fem.area, fem.bx, fem.by, u, p, eps, nv)),
        ("hessian_entries", (fem.tri, fem.area, fem.bx, fem.by, u, p, eps)),
        ("vertex_gradients", (fem.tri, fem.area, gx, gy, nv)),
        ("quadratic_fit", (indptr, indices, x, y, u, scale)),
        ("linear_fit", (indptr_l, indices_l, x, y, lap, scale_l)),
        ("deficit_terms", (fem.tri, gx, gy, hxx, hxy, hyy, p, 2, mask)),
        ("identity_terms", (fem.tri, gx, gy, hxx, hxy, hyy, lx, ly, p, 2, mask)),
    ]
    return mesh, cases


def max_abs_diff(a, b) -> float:
    if isinstance(a, tuple):
        return max(max_abs_diff(x, y) for x, y in zip(a, b))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b), initial=0.0))


def coo_diff(a, b, nv: int) -> float:
    """COO triplet order is backend-specific; compare assembled matrices."""
    ma = coo_matrix((a[2], (a[0], a[1])), shape=(nv, nv)).tocsr()
    mb = coo_matrix((b[2], (b[0], b[1])), shape=(nv, nv)).tocsr()
    d = ma - mb
    return float(np.max(np.abs(d.data), initial=0.0))


def time_call(fn, args, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.02)
    ap.add_argument("--p", type=float, default=1.5)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if _maybe_numba is None:
        import ptorsion.kernels.numba_backend as numba_backend
    else:
        numba_backend = _maybe_numba

    mesh, cases = build_inputs(args.h, args.p)
    print(f"disk mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} "
          f"triangles (h={mesh.h:.4g}), p={args.p}, repeats={args.repeats}")
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} "
          f"{'speedup':>8} {'max diff':>10}")

    for name, ka in cases:
        f_np = getattr(numpy_backend, name)
        f_nb = getattr(numba_backend, name)
        out_np = f_np(*ka)
        out_nb = f_nb(*ka)   # also triggers JIT compilation
        if name == "hessian_entries":
            diff = coo_diff(out_np, out_nb, mesh.n_vertices)
        else:
            diff = max_abs_diff(out_np, out_nb)
        t_np = time_call(f_np, ka, args.repeats)
        t_nb = time_call(f_nb, ka, args.repeats)
        print(f"{name:<18} {1e3 * t_np:>10.3f} {1e3 * t_nb:>10.3f} "
              f"{t_np / t_nb:>7.1f}x {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
