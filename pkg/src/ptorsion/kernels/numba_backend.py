"""Numba-compiled implementations of the hot numerical kernels.

Sequential explicit loops (no fastmath, no parallel reductions) so results
are deterministic run to run; agreement with the numpy backend is exact up
to summation order.
"""

from __future__ import annotations

import os

import numba
import numpy as np

NAME = "numba"

_threads = os.environ.get("PTORSION_THREADS")
if _threads:
    try:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
    except (ValueError, RuntimeError):
        pass

_jit = numba.njit(cache=True, fastmath=False)


@_jit
def tri_gradients(tri, bx, by, u):
    m = tri.shape[0]
    gx = np.empty(m)
    gy = np.empty(m)
    for t in range(m):
        sx = 0.0
        sy = 0.0
        for k in range(3):
            uv = u[tri[t, k]]
            sx += bx[t, k] * uv
            sy += by[t, k] * uv
        gx[t] = sx
        gy[t] = sy
    return gx, gy


@_jit
def energy_seminorm(tri, area, bx, by, u, p, eps):
    m = tri.shape[0]
    acc = 0.0
    for t in range(m):
        sx = 0.0
        sy = 0.0
        for k in range(3):
            uv = u[tri[t, k]]
            sx += bx[t, k] * uv
            sy += by[t, k] * uv
        q = sx * sx + sy * sy + eps * eps
        acc += area[t] * q ** (0.5 * p)
    return acc / p


@_jit
def flux_assembly(tri, area, bx, by, u, p, eps, nv):
    m = tri.shape[0]
    g = np.zeros(nv)
    for t in range(m):
        sx = 0.0
        sy = 0.0
        for k in range(3):
            uv = u[tri[t, k]]
            sx += bx[t, k] * uv
            sy += by[t, k] * uv
        q = sx * sx + sy * sy + eps * eps
        w = area[t] * q ** (0.5 * p - 1.0)
        for k in range(3):
            g[tri[t, k]] += w * (sx * bx[t, k] + sy * by[t, k])
    return g


@_jit
def hessian_entries(tri, area, bx, by, u, p, eps):
    m = tri.shape[0]
    rows = np.empty(9 * m, dtype=np.int64)
    cols = np.empty(9 * m, dtype=np.int64)
    vals = np.empty(9 * m)
    for t in range(m):
        sx = 0.0
        sy = 0.0
        for k in range(3):
            uv = u[tri[t, k]]
            sx += bx[t, k] * uv
            sy += by[t, k] * uv
        gg = sx * sx + sy * sy
        q = gg + eps * eps
        w1 = q ** (0.5 * p - 1.0)
        lam_par = q ** (0.5 * p - 2.0) * (eps * eps + (p - 1.0) * gg)
        floor = 1e-12 * w1
        if lam_par < floor:
            lam_par = floor
        w2 = (lam_par - w1) / gg if gg > 0 else 0.0
        base = 9 * t
        for a in range(3):
            gba = sx * bx[t, a] + sy * by[t, a]
            for b in range(3):
                gbb = sx * bx[t, b] + sy * by[t, b]
                v = area[t] * (w1 * (bx[t, a] * bx[t, b] + by[t, a] * by[t, b])
                               + w2 * gba * gbb)
                rows[base] = tri[t, a]
                cols[base] = tri[t, b]
                vals[base] = v
                base += 1
    return rows, cols, vals


@_jit
def vertex_gradients(tri, area, gx, gy, nv):
    vgx = np.zeros(nv)
    vgy = np.zeros(nv)
    wsum = np.zeros(nv)
    for t in range(tri.shape[0]):
        a = area[t]
        for k in range(3):
            v = tri[t, k]
            vgx[v] += a * gx[t]
            vgy[v] += a * gy[t]
            wsum[v] += a
    return vgx / wsum, vgy / wsum


@_jit
def quadratic_fit(indptr, indices, x, y, vals, scale):
    n = len(indptr) - 1
    hxx = np.zeros(n)
    hxy = np.zeros(n)
    hyy = np.zeros(n)
    ok = np.ones(n, dtype=np.bool_)
    for v in range(n):
        k0 = indptr[v]
        k = indptr[v + 1] - k0
        if k < 6:
            ok[v] = False
            continue
        A = np.empty((k, 6))
        b = np.empty(k)
        s = scale[v]
        for j in range(k):
            w = indices[k0 + j]
            X = (x[w] - x[v]) / s
            Y = (y[w] - y[v]) / s
            A[j, 0] = 1.0
            A[j, 1] = X
            A[j, 2] = Y
            A[j, 3] = X * X
            A[j, 4] = X * Y
            A[j, 5] = Y * Y
            b[j] = vals[w]
        sol, _, rank, sv = np.linalg.lstsq(A, b)
        if rank < 6 or sv[5] < 1e-10 * sv[0]:
            ok[v] = False
            continue
        hxx[v] = 2.0 * sol[3] / (s * s)
        hxy[v] = sol[4] / (s * s)
        hyy[v] = 2.0 * sol[5] / (s * s)
    return hxx, hxy, hyy, ok


@_jit
def linear_fit(indptr, indices, x, y, vals, scale):
    n = len(indptr) - 1
    dx = np.zeros(n)
    dy = np.zeros(n)
    ok = np.ones(n, dtype=np.bool_)
    for v in range(n):
        k0 = indptr[v]
        k = indptr[v + 1] - k0
        if k < 3:
            ok[v] = False
            continue
        A = np.empty((k, 3))
        b = np.empty(k)
        s = scale[v]
        for j in range(k):
            w = indices[k0 + j]
            A[j, 0] = 1.0
            A[j, 1] = (x[w] - x[v]) / s
            A[j, 2] = (y[w] - y[v]) / s
            b[j] = vals[w]
        sol, _, rank, sv = np.linalg.lstsq(A, b)
        if rank < 3 or sv[2] < 1e-10 * sv[0]:
            ok[v] = False
            continue
        dx[v] = sol[1] / s
        dy[v] = sol[2] / s
    return dx, dy, ok


@_jit
def deficit_terms(tri, gx, gy, hxx, hxy, hyy, p, dim, mask):
    m = tri.shape[0]
    integrand = np.zeros(m)
    deltap = np.zeros(m)
    c = p - 2.0
    for t in range(m):
        if not mask[t]:
            continue
        i, j, k = tri[t, 0], tri[t, 1], tri[t, 2]
        axx = (hxx[i] + hxx[j] + hxx[k]) / 3.0
        axy = (hxy[i] + hxy[j] + hxy[k]) / 3.0
        ayy = (hyy[i] + hyy[j] + hyy[k]) / 3.0
        gn = np.sqrt(gx[t] * gx[t] + gy[t] * gy[t])
        nx = gx[t] / gn
        ny = gy[t] / gn
        b00 = (1.0 + c * nx * nx) * axx + c * nx * ny * axy
        b01 = (1.0 + c * nx * nx) * axy + c * nx * ny * ayy
        b10 = c * nx * ny * axx + (1.0 + c * ny * ny) * axy
        b11 = c * nx * ny * axy + (1.0 + c * ny * ny) * ayy
        frob2 = b00 * b00 + b01 * b01 + b10 * b10 + b11 * b11
        trb = b00 + b11
        w = gn ** (p - 2.0)
        integrand[t] = w * (frob2 - trb * trb / dim)
        deltap[t] = w * trb
    return integrand, deltap


@_jit
def identity_terms(tri, gx, gy, hxx, hxy, hyy, lx, ly, p, dim, mask):
    m = tri.shape[0]
    out = np.zeros(m)
    for t in range(m):
        if not mask[t]:
            continue
        i, j, k = tri[t, 0], tri[t, 1], tri[t, 2]
        axx = (hxx[i] + hxx[j] + hxx[k]) / 3.0
        axy = (hxy[i] + hxy[j] + hxy[k]) / 3.0
        ayy = (hyy[i] + hyy[j] + hyy[k]) / 3.0
        alx = (lx[i] + lx[j] + lx[k]) / 3.0
        aly = (ly[i] + ly[j] + ly[k]) / 3.0
        gn = np.sqrt(gx[t] * gx[t] + gy[t] * gy[t])
        nx = gx[t] / gn
        ny = gy[t] / gn
        hnx = axx * nx + axy * ny
        hny = axy * nx + ayy * ny
        frob2 = axx * axx + 2.0 * axy * axy + ayy * ayy
        glap = gx[t] * alx + gy[t] * aly
        w = gn ** (p - 2.0)
        term = (p - 1.0) * w * ((p - 2.0) * (hnx * hnx + hny * hny) + frob2 + glap)
        out[t] = term + (axx + ayy) / dim
    return out
