"""Vectorized numpy implementations of the hot numerical kernels.

Reference semantics for the numba backend: same signatures, same results up
to floating-point accumulation order.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def tri_gradients(tri, bx, by, u):
    ut = u[tri]
    return np.sum(bx * ut, axis=1), np.sum(by * ut, axis=1)


def energy_seminorm(tri, area, bx, by, u, p, eps):
    """Sum over triangles of area/p * (|grad u|^2 + eps^2)^(p/2)."""
    gx, gy = tri_gradients(tri, bx, by, u)
    q = gx * gx + gy * gy + eps * eps
    return float(np.sum(area * q ** (0.5 * p)) / p)


def flux_assembly(tri, area, bx, by, u, p, eps, nv):
    """Nodal derivative of the seminorm part of the energy (no load term)."""
    gx, gy = tri_gradients(tri, bx, by, u)
    q = gx * gx + gy * gy + eps * eps
    w = area * q ** (0.5 * p - 1.0)
    cx, cy = w * gx, w * gy
    g = np.zeros(nv)
    for k in range(3):
        np.add.at(g, tri[:, k], cx * bx[:, k] + cy * by[:, k])
    return g


def hessian_entries(tri, area, bx, by, u, p, eps):
    """COO entries of the energy Hessian over all nodes (9 per triangle).

    The per-triangle integrand Hessian w1*I + w2*G G^T is SPD for eps > 0;
    a relative floor on the parallel eigenvalue guards against underflow.
    """
    gx, gy = tri_gradients(tri, bx, by, u)
    gg = gx * gx + gy * gy
    q = gg + eps * eps
    w1 = q ** (0.5 * p - 1.0)
    lam_par = q ** (0.5 * p - 2.0) * (eps * eps + (p - 1.0) * gg)
    lam_par = np.maximum(lam_par, 1e-12 * w1)
    w2 = np.where(gg > 0, (lam_par - w1) / np.where(gg > 0, gg, 1.0), 0.0)

    m = len(tri)
    rows = np.empty(9 * m, dtype=np.int64)
    cols = np.empty(9 * m, dtype=np.int64)
    vals = np.empty(9 * m)
    idx = 0
    gb = [gx * bx[:, a] + gy * by[:, a] for a in range(3)]
    for a in range(3):
        for b in range(3):
            rows[idx * m:(idx + 1) * m] = tri[:, a]
            cols[idx * m:(idx + 1) * m] = tri[:, b]
            vals[idx * m:(idx + 1) * m] = area * (
                w1 * (bx[:, a] * bx[:, b] + by[:, a] * by[:, b])
                + w2 * gb[a] * gb[b])
            idx += 1
    return rows, cols, vals


def vertex_gradients(tri, area, gx, gy, nv):
    """Area-weighted average of adjacent-triangle gradients at each vertex."""
    vgx = np.zeros(nv)
    vgy = np.zeros(nv)
    wsum = np.zeros(nv)
    for k in range(3):
        np.add.at(vgx, tri[:, k], area * gx)
        np.add.at(vgy, tri[:, k], area * gy)
        np.add.at(wsum, tri[:, k], area)
    return vgx / wsum, vgy / wsum


def quadratic_fit(indptr, indices, x, y, vals, scale):
    """Per-vertex least-squares quadratic over the patch; returns the three
    second-derivative components at the vertex and a success flag."""
    n = len(indptr) - 1
    hxx = np.zeros(n)
    hxy = np.zeros(n)
    hyy = np.zeros(n)
    ok = np.ones(n, dtype=np.bool_)
    for v in range(n):
        w = indices[indptr[v]:indptr[v + 1]]
        if len(w) < 6:
            ok[v] = False
            continue
        s = scale[v]
        X = (x[w] - x[v]) / s
        Y = (y[w] - y[v]) / s
        A = np.stack([np.ones_like(X), X, Y, X * X, X * Y, Y * Y], axis=1)
        sol, _, rank, sv = np.linalg.lstsq(A, vals[w], rcond=None)
        if rank < 6 or sv[-1] < 1e-10 * sv[0]:
            ok[v] = False
            continue
        hxx[v] = 2.0 * sol[3] / (s * s)
        hxy[v] = sol[4] / (s * s)
        hyy[v] = 2.0 * sol[5] / (s * s)
    return hxx, hxy, hyy, ok


def linear_fit(indptr, indices, x, y, vals, scale):
    """Per-vertex least-squares plane; returns its slope at the vertex."""
    n = len(indptr) - 1
    dx = np.zeros(n)
    dy = np.zeros(n)
    ok = np.ones(n, dtype=np.bool_)
    for v in range(n):
        w = indices[indptr[v]:indptr[v + 1]]
        if len(w) < 3:
            ok[v] = False
            continue
        s = scale[v]
        X = (x[w] - x[v]) / s
        Y = (y[w] - y[v]) / s
        A = np.stack([np.ones_like(X), X, Y], axis=1)
        sol, _, rank, sv = np.linalg.lstsq(A, vals[w], rcond=None)
        if rank < 3 or sv[-1] < 1e-10 * sv[0]:
            ok[v] = False
            continue
        dx[v] = sol[1] / s
        dy[v] = sol[2] / s
    return dx, dy, ok


def _tri_avg(tri, f):
    return (f[tri[:, 0]] + f[tri[:, 1]] + f[tri[:, 2]]) / 3.0


def deficit_terms(tri, gx, gy, hxx, hxy, hyy, p, dim, mask):
    """Pointwise deficit integrand |g|^(p-2) * (|B|_F^2 - tr(B)^2/dim) with
    B = (I + (p-2) n n^T) H, plus the trace representation of the p-Laplacian.
    Entries where mask is False are set to zero."""
    a_xx, a_xy, a_yy = _tri_avg(tri, hxx), _tri_avg(tri, hxy), _tri_avg(tri, hyy)
    gg = gx * gx + gy * gy
    gn = np.sqrt(gg)
    safe = np.where(mask, gn, 1.0)
    nx, ny = gx / safe, gy / safe
    c = p - 2.0
    b00 = (1.0 + c * nx * nx) * a_xx + c * nx * ny * a_xy
    b01 = (1.0 + c * nx * nx) * a_xy + c * nx * ny * a_yy
    b10 = c * nx * ny * a_xx + (1.0 + c * ny * ny) * a_xy
    b11 = c * nx * ny * a_xy + (1.0 + c * ny * ny) * a_yy
    frob2 = b00 * b00 + b01 * b01 + b10 * b10 + b11 * b11
    trb = b00 + b11
    w = safe ** (p - 2.0)
    integrand = np.where(mask, w * (frob2 - trb * trb / dim), 0.0)
    deltap = np.where(mask, w * trb, 0.0)
    return integrand, deltap


def identity_terms(tri, gx, gy, hxx, hxy, hyy, lx, ly, p, dim, mask):
    """Pointwise integrand of the volume side of the boundary-flux identity."""
    a_xx, a_xy, a_yy = _tri_avg(tri, hxx), _tri_avg(tri, hxy), _tri_avg(tri, hyy)
    a_lx, a_ly = _tri_avg(tri, lx), _tri_avg(tri, ly)
    gg = gx * gx + gy * gy
    gn = np.sqrt(gg)
    safe = np.where(mask, gn, 1.0)
    nx, ny = gx / safe, gy / safe
    hn_x = a_xx * nx + a_xy * ny
    hn_y = a_xy * nx + a_yy * ny
    frob2 = a_xx * a_xx + 2.0 * a_xy * a_xy + a_yy * a_yy
    glap = gx * a_lx + gy * a_ly
    w = safe ** (p - 2.0)
    term = (p - 1.0) * w * ((p - 2.0) * (hn_x * hn_x + hn_y * hn_y) + frob2 + glap)
    lap = a_xx + a_yy
    return np.where(mask, term + lap / dim, 0.0)
