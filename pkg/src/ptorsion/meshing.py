"""Unstructured quasi-uniform triangulation of parametric domains.

Force-equilibrated Delaunay meshing in the distmesh spirit: boundary vertices
are pinned at equal-arclength positions exactly on the curve, interior
vertices start on a hexagonal lattice and relax under edge repulsion, and the
triangulation is the Delaunay triangulation filtered by centroid membership
(which also carves holes).  Deterministic: no randomness anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import MeshError, MeshFormatError
from .geometry import TWO_PI, BoundaryCurve

MIN_ANGLE_DEG = 20.0
MAX_EDGE_FACTOR = 2.0
FSCALE = 1.2
STEP = 0.2


@dataclass
class BoundaryEdges:
    """Boundary edge records; one row per edge of the discrete boundary."""

    v0: np.ndarray          # first endpoint (vertex id)
    v1: np.ndarray          # second endpoint
    component: np.ndarray   # boundary loop index
    t_mid: np.ndarray       # curve parameter of the arc midpoint
    normal: np.ndarray      # outward unit normal at t_mid, shape (k, 2)
    chord: np.ndarray       # straight-line edge length
    arc: np.ndarray         # exact arclength between the endpoint parameters
    tri: np.ndarray         # adjacent triangle index

    def __len__(self):
        return len(self.v0)


class Mesh:
    def __init__(self, points, triangles, h, vertex_component, vertex_param,
                 boundary: BoundaryEdges):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.h = float(h)
        self.vertex_component = vertex_component
        self.vertex_param = vertex_param
        self.boundary = boundary

    @property
    def n_vertices(self):
        return len(self.points)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def is_boundary_vertex(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary.v0] = True
        mask[self.boundary.v1] = True
        return mask

    @cached_property
    def tri_areas(self):
        p = self.points[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    @cached_property
    def area(self):
        return float(np.sum(self.tri_areas))

    def min_angle_deg(self):
        return float(np.min(_tri_angles_deg(self.points, self.triangles)))

    def max_edge(self):
        p = self.points[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
        return float(np.max(np.linalg.norm(e, axis=-1)))

    def euler_characteristic(self):
        edges = _unique_edges(self.triangles)
        return self.n_vertices - len(edges) + self.n_triangles


def _tri_angles_deg(points, triangles):
    p = points[triangles]
    out = np.empty((len(triangles), 3))
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        cosang = np.clip(np.sum(a * b, axis=1) / (na * nb), -1.0, 1.0)
        out[:, k] = np.degrees(np.arccos(cosang))
    return out


def _unique_edges(triangles):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def _orient_ccw(points, triangles):
    p = points[triangles]
    signed = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
              - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flip = signed < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def _delaunay_inside(points, curve):
    tri = Delaunay(points).simplices.astype(np.int64)
    centroids = points[tri].mean(axis=1)
    keep = curve.inside(centroids)
    return _orient_ccw(points, tri[keep])


def triangulate(curve: BoundaryCurve, h: float, max_iters: int = 120) -> Mesh:
    """Mesh the domain at target edge length h.

    Refuses h larger than half the interior touching radius (the boundary
    would be under-resolved); raises MeshError with a suggested usable h.
    """
    if not h > 0:
        raise MeshError(f"mesh size must be positive, got {h}")
    rho_i, _ = curve.touching_radii
    if h > 0.5 * rho_i * (1 + 1e-12):
        raise MeshError(
            f"h={h:g} too large for this domain (interior touching radius "
            f"{rho_i:.4g}); use h <= {0.5 * rho_i:.4g}")

    # pinned boundary vertices at equal arclength, exactly on the curve
    bpts, bcomp, bparam, comp_counts = [], [], [], []
    for ci, comp in enumerate(curve.components):
        n_b = max(8, int(math.ceil(comp.arclength / h - 1e-9)))
        t = comp.equal_arclength_params(n_b)
        bpts.append(comp.point(t))
        bcomp.append(np.full(n_b, ci, dtype=np.int64))
        bparam.append(t)
        comp_counts.append(n_b)
    bpts = np.concatenate(bpts)
    bcomp = np.concatenate(bcomp)
    bparam = np.concatenate(bparam)
    nfix = len(bpts)

    # dense boundary cloud for distance queries during relaxation
    tcloud = np.linspace(0.0, TWO_PI, 16384, endpoint=False)
    cloud = np.concatenate([c.point(tcloud) for c in curve.components])
    cloud_nu = np.concatenate([c.outward_normal(tcloud) for c in curve.components])
    tree = cKDTree(cloud)

    # hexagonal interior seeds, kept strictly inside with a clearance band
    xmin, ymin = cloud.min(axis=0) - h
    xmax, ymax = cloud.max(axis=0) + h
    dy = h * math.sqrt(3.0) / 2.0
    rows = []
    j = 0
    y = ymin
    while y <= ymax:
        xs = np.arange(xmin + (0.5 * h if j % 2 else 0.0), xmax + h, h)
        rows.append(np.stack([xs, np.full_like(xs, y)], axis=1))
        y += dy
        j += 1
    seeds = np.concatenate(rows)
    d, _ = tree.query(seeds)
    seeds = seeds[curve.inside(seeds) & (d >= 0.7 * h)]

    pts = np.concatenate([bpts, seeds])
    last = pts.copy() + 10 * h  # force initial triangulation
    tri = None
    for _ in range(max_iters):
        if np.max(np.linalg.norm(pts - last, axis=1)) > 0.1 * h:
            tri = _delaunay_inside(pts, curve)
            edges = _unique_edges(tri)
            last = pts.copy()
        vec = pts[edges[:, 1]] - pts[edges[:, 0]]
        L = np.linalg.norm(vec, axis=1)
        L0 = FSCALE * math.sqrt(float(np.mean(L ** 2)))
        f = np.maximum(L0 - L, 0.0) / L
        fvec = f[:, None] * vec
        force = np.zeros_like(pts)
        np.add.at(force, edges[:, 0], -fvec)
        np.add.at(force, edges[:, 1], fvec)
        move = STEP * force[nfix:]
        pts[nfix:] += move
        # retract interior points that escaped or crowded the boundary
        d, idx = tree.query(pts[nfix:])
        bad = (~curve.inside(pts[nfix:])) | (d < 0.5 * h)
        if np.any(bad):
            proj = cloud[idx[bad]] - 0.7 * h * cloud_nu[idx[bad]]
            pts[nfix:][bad] = proj
        if np.max(np.linalg.norm(move, axis=1), initial=0.0) < 0.01 * h:
            break

    tri = _delaunay_inside(pts, curve)
    pts, tri = _drop_unused(pts, tri, nfix)

    # local repair of low-quality triangles
    for _ in range(10):
        ang = _tri_angles_deg(pts, tri).min(axis=1)
        bad = np.flatnonzero(ang < MIN_ANGLE_DEG)
        if len(bad) == 0:
            break
        neigh = _vertex_neighbors(tri, len(pts))
        moved = set()
        extra = []
        for b in bad:
            interior = [v for v in tri[b] if v >= nfix and v not in moved]
            if interior:
                v = interior[0]
                pts[v] = pts[list(neigh[v])].mean(axis=0)
                moved.add(v)
            else:
                extra.append(pts[tri[b]].mean(axis=0))
        if extra:
            pts = np.concatenate([pts, np.asarray(extra)])
        tri = _delaunay_inside(pts, curve)
        pts, tri = _drop_unused(pts, tri, nfix)
    else:
        ang = _tri_angles_deg(pts, tri).min(axis=1)
        if np.min(ang) < MIN_ANGLE_DEG:
            raise MeshError(
                f"mesh quality floor violated: min angle {np.min(ang):.2f} deg "
                f"after repair (target >= {MIN_ANGLE_DEG})")

    boundary = _extract_boundary(curve, pts, tri, nfix, bcomp, bparam, comp_counts)
    vcomp = np.full(len(pts), -1, dtype=np.int64)
    vpar = np.full(len(pts), np.nan)
    vcomp[:nfix] = bcomp
    vpar[:nfix] = bparam
    mesh = Mesh(pts, tri, h, vcomp, vpar, boundary)
    _validate(mesh, curve)
    return mesh


def _drop_unused(pts, tri, nfix):
    used = np.zeros(len(pts), dtype=bool)
    used[:nfix] = True
    used[tri.ravel()] = True
    if np.all(used):
        return pts, tri
    remap = np.cumsum(used) - 1
    return pts[used], remap[tri]


def _vertex_neighbors(tri, n):
    neigh = [set() for _ in range(n)]
    for a, b, c in tri:
        neigh[a].update((b, c))
        neigh[b].update((a, c))
        neigh[c].update((a, b))
    return neigh


def _extract_boundary(curve, pts, tri, nfix, bcomp, bparam, comp_counts):
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    owner = np.tile(np.arange(len(tri)), 3)
    key = np.sort(e, axis=1)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    idx = first[counts == 1]
    ev, et = e[idx], owner[idx]

    if np.any(ev >= nfix):
        raise MeshError("boundary of the triangulation contains interior vertices")
    offsets = np.concatenate([[0], np.cumsum(comp_counts)])
    comp_of = bcomp[ev[:, 0]]
    if np.any(bcomp[ev[:, 1]] != comp_of):
        raise MeshError("a boundary edge joins two different boundary loops")
    # endpoints must be consecutive in the per-loop ordering
    local0 = ev[:, 0] - offsets[comp_of]
    local1 = ev[:, 1] - offsets[comp_of]
    n_of = np.asarray(comp_counts)[comp_of]
    step = (local1 - local0) % n_of
    if not np.all((step == 1) | (step == n_of - 1)):
        raise MeshError("boundary loop of the triangulation skips boundary vertices")

    t0 = bparam[ev[:, 0]]
    t1 = bparam[ev[:, 1]]
    dt = np.abs(t1 - t0)
    wrap = dt > math.pi
    t_mid = np.where(wrap, ((t0 + t1 + TWO_PI) / 2.0) % TWO_PI, (t0 + t1) / 2.0)

    normal = np.empty((len(ev), 2))
    arc = np.empty(len(ev))
    for ci, comp in enumerate(curve.components):
        sel = comp_of == ci
        normal[sel] = comp.outward_normal(t_mid[sel])
        for k in np.flatnonzero(sel):
            lo, hi = sorted((t0[k], t1[k]))
            if hi - lo > math.pi:   # the edge wraps through t = 0
                arc[k] = comp.arclength_between(hi, lo)
            else:
                arc[k] = comp.arclength_between(lo, hi)
    chord = np.linalg.norm(pts[ev[:, 1]] - pts[ev[:, 0]], axis=1)

    order = np.lexsort((t_mid, comp_of))
    return BoundaryEdges(
        v0=ev[order, 0], v1=ev[order, 1], component=comp_of[order],
        t_mid=t_mid[order], normal=normal[order], chord=chord[order],
        arc=arc[order], tri=et[order])


def _validate(mesh: Mesh, curve: BoundaryCurve):
    if np.min(mesh.tri_areas) <= 0:
        raise MeshError("non-positive triangle signed area")
    if mesh.max_edge() > MAX_EDGE_FACTOR * mesh.h * (1 + 1e-12):
        raise MeshError(
            f"max edge {mesh.max_edge():.4g} exceeds {MAX_EDGE_FACTOR}*h")
    # every boundary vertex belongs to exactly two boundary edges
    deg = np.zeros(mesh.n_vertices, dtype=int)
    np.add.at(deg, mesh.boundary.v0, 1)
    np.add.at(deg, mesh.boundary.v1, 1)
    bverts = np.flatnonzero(mesh.vertex_component >= 0)
    if not (np.all(deg[bverts] == 2) and np.all(deg[mesh.vertex_component < 0] == 0)):
        raise MeshError("discrete boundary is not a disjoint union of closed loops")
    # boundary vertices sit on the curve
    for ci, comp in enumerate(curve.components):
        sel = mesh.vertex_component == ci
        gap = np.linalg.norm(comp.point(mesh.vertex_param[sel]) - mesh.points[sel], axis=1)
        if np.max(gap, initial=0.0) > 1e-12 * max(1.0, curve.measures.diameter):
            raise MeshError("boundary vertex strays from the boundary curve")


# ---------------------------------------------------------------------------
# CSV serialization


def save_mesh(mesh: Mesh, path: str) -> None:
    """Write the sectioned CSV mesh format (VERTICES / TRIANGLES / BOUNDARY)."""
    with open(path, "w") as f:
        f.write("VERTICES\n")
        for x, y in mesh.points:
            f.write(f"{x:.17g},{y:.17g}\n")
        f.write("TRIANGLES\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i},{j},{k}\n")
        f.write("BOUNDARY\n")
        b = mesh.boundary
        for k in range(len(b)):
            f.write(f"{b.v0[k]},{b.v1[k]},{b.t_mid[k]:.17g},"
                    f"{b.normal[k, 0]:.17g},{b.normal[k, 1]:.17g}\n")


def load_mesh(path: str, curve: BoundaryCurve) -> Mesh:
    """Read the sectioned CSV format back; recomputes per-vertex curve
    parameters by Newton projection (vertices are stored exactly on the curve).
    """
    sections: dict[str, list] = {"VERTICES": [], "TRIANGLES": [], "BOUNDARY": []}
    current = None
    with open(path) as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line in sections:
                current = line
                continue
            if current is None:
                raise MeshFormatError("data before any section header", path, ln)
            parts = line.split(",")
            want = {"VERTICES": 2, "TRIANGLES": 3, "BOUNDARY": 5}[current]
            if len(parts) != want:
                raise MeshFormatError(
                    f"expected {want} columns in {current}, got {len(parts)}", path, ln)
            try:
                if current == "TRIANGLES":
                    sections[current].append([int(v) for v in parts])
                elif current == "BOUNDARY":
                    sections[current].append(
                        [int(parts[0]), int(parts[1])] + [float(v) for v in parts[2:]])
                else:
                    sections[current].append([float(v) for v in parts])
            except ValueError as e:
                raise MeshFormatError(f"unparseable value ({e})", path, ln) from None
    pts = np.asarray(sections["VERTICES"], dtype=np.float64)
    tri = np.asarray(sections["TRIANGLES"], dtype=np.int64)
    if len(pts) == 0 or len(tri) == 0 or len(sections["BOUNDARY"]) == 0:
        raise MeshFormatError("mesh file is missing a required section", path, 0)
    if np.min(tri) < 0 or np.max(tri) >= len(pts):
        raise MeshFormatError("triangle vertex index out of range", path, 0)
    braw = sections["BOUNDARY"]
    v0 = np.asarray([r[0] for r in braw], dtype=np.int64)
    v1 = np.asarray([r[1] for r in braw], dtype=np.int64)
    t_mid = np.asarray([r[2] for r in braw])
    normal = np.asarray([r[3:5] for r in braw])
    if np.min(np.concatenate([v0, v1])) < 0 or np.max(np.concatenate([v0, v1])) >= len(pts):
        raise MeshFormatError("boundary vertex index out of range", path, 0)

    # assign each stored edge to the loop whose midpoint matches t_mid
    mids = np.stack([c.point(t_mid) for c in curve.components])  # (ncomp, k, 2)
    edge_mid = 0.5 * (pts[v0] + pts[v1])
    comp_of = np.argmin(np.linalg.norm(mids - edge_mid[None], axis=-1), axis=0)

    vcomp = np.full(len(pts), -1, dtype=np.int64)
    vpar = np.full(len(pts), np.nan)
    for v, t_hint, ci in zip(np.concatenate([v0, v1]),
                             np.concatenate([t_mid, t_mid]),
                             np.concatenate([comp_of, comp_of])):
        if vcomp[v] >= 0:
            continue
        vcomp[v] = ci
        vpar[v] = _project_param(curve.components[ci], pts[v], t_hint)

    arc = np.empty(len(v0))
    chord = np.linalg.norm(pts[v1] - pts[v0], axis=1)
    for k in range(len(v0)):
        comp = curve.components[comp_of[k]]
        lo, hi = sorted((vpar[v0[k]], vpar[v1[k]]))
        arc[k] = comp.arclength_between(hi, lo) if hi - lo > math.pi \
            else comp.arclength_between(lo, hi)

    # adjacent triangle lookup
    emap = {}
    for ti, (a, b, c) in enumerate(tri):
        for u, v in ((a, b), (b, c), (c, a)):
            emap[(min(u, v), max(u, v))] = ti
    et = np.asarray([emap.get((min(a, b), max(a, b)), -1) for a, b in zip(v0, v1)])
    if np.any(et < 0):
        raise MeshFormatError("boundary edge does not belong to any triangle", path, 0)

    h = float(np.median(chord))
    boundary = BoundaryEdges(v0=v0, v1=v1, component=comp_of, t_mid=t_mid,
                             normal=normal, chord=chord, arc=arc, tri=et)
    mesh = Mesh(pts, _orient_ccw(pts, tri), h, vcomp, vpar, boundary)
    return mesh


def _project_param(comp, x, t0):
    """Parameter of the curve point nearest x, Newton-polished from t0."""
    t = float(t0)
    for _ in range(40):
        g = comp.point(t) - x
        d1 = comp.deriv1(t)
        d2 = comp.deriv2(t)
        f = float(g @ d1)
        fp = float(d1 @ d1 + g @ d2)
        if fp == 0:
            break
        step = f / fp
        t -= step
        if abs(step) < 1e-15:
            break
    return t % TWO_PI
