"""Smooth planar domains described by parametric C^2 boundary loops.

Supported families: disks, ellipses, concentric circular annuli, and
star-shaped domains with a trigonometric-polynomial radius function.  Every
loop is parametrized on [0, 2*pi) with the domain on its left, so the outward
unit normal is the clockwise rotation of the unit tangent and the signed
curvature of a unit disk is +1 (inner annulus boundary: -1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateGeometryError, InvalidDomainError
from .quadrature import adaptive_quad, fixed_panel

TWO_PI = 2.0 * math.pi

TOUCHING_FLOOR_FACTOR = 1e-6   # halving floor for touching radii, relative to diameter
_VALIDATE_TEST_POINTS = 512    # candidate tangency points per component
_VALIDATE_CLOUD = 4096         # boundary cloud density per component


# ---------------------------------------------------------------------------
# domain specification


@dataclass(frozen=True)
class DomainSpec:
    """Validated description of a supported domain family.

    ``rho_i`` / ``rho_e`` optionally override the computed touching radii;
    overrides are recorded downstream in reports.
    """

    kind: str
    params: tuple  # kind-specific, hashable
    rho_i: float | None = None
    rho_e: float | None = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def disk(r: float, **over) -> "DomainSpec":
        if not (r > 0):
            raise InvalidDomainError(f"disk radius must be positive, got {r}")
        return DomainSpec("disk", (float(r),), **over)

    @staticmethod
    def ellipse(a: float, b: float, **over) -> "DomainSpec":
        if not (a >= b > 0):
            raise InvalidDomainError(
                f"ellipse semi-axes must satisfy a >= b > 0, got a={a}, b={b}")
        return DomainSpec("ellipse", (float(a), float(b)), **over)

    @staticmethod
    def annulus(r1: float, r2: float, **over) -> "DomainSpec":
        if not (0 < r1 < r2):
            raise InvalidDomainError(
                f"annulus radii must satisfy 0 < r1 < r2, got r1={r1}, r2={r2}")
        return DomainSpec("annulus", (float(r1), float(r2)), **over)

    @staticmethod
    def fourier(c0: float, cos_coef=(), sin_coef=(), **over) -> "DomainSpec":
        cos_coef = tuple(float(c) for c in cos_coef)
        sin_coef = tuple(float(s) for s in sin_coef)
        if not (c0 > 0):
            raise InvalidDomainError(f"fourier mean radius must be positive, got {c0}")
        spec = DomainSpec("fourier", (float(c0), cos_coef, sin_coef), **over)
        # Positivity of the radius function on a dense grid guarantees a
        # simple regular curve (star-shaped about the origin).
        theta = np.linspace(0.0, TWO_PI, 8192, endpoint=False)
        rho = _fourier_radius(theta, c0, cos_coef, sin_coef)
        if np.min(rho) <= 0:
            raise InvalidDomainError(
                "fourier radius function is not strictly positive "
                f"(min {np.min(rho):.6g}); the curve would self-intersect")
        return spec

    def __post_init__(self):
        if self.rho_i is not None and not self.rho_i > 0:
            raise InvalidDomainError("rho_i override must be positive")
        if self.rho_e is not None and not self.rho_e > 0:
            raise InvalidDomainError("rho_e override must be positive")

    # -- (de)serialization ---------------------------------------------------

    @staticmethod
    def from_dict(d: dict) -> "DomainSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise InvalidDomainError("domain description must be an object with a 'kind' key")
        d = dict(d)
        kind = d.pop("kind")
        over = {}
        for k in ("rho_i", "rho_e"):
            if k in d:
                over[k] = float(d.pop(k))
        try:
            if kind == "disk":
                return DomainSpec.disk(float(d.pop("r")), **over)._check_leftover(d)
            if kind == "ellipse":
                return DomainSpec.ellipse(float(d.pop("a")), float(d.pop("b")), **over)._check_leftover(d)
            if kind == "annulus":
                return DomainSpec.annulus(float(d.pop("r1")), float(d.pop("r2")), **over)._check_leftover(d)
            if kind == "fourier":
                return DomainSpec.fourier(
                    float(d.pop("c0")), d.pop("cos", ()), d.pop("sin", ()), **over
                )._check_leftover(d)
        except KeyError as e:
            raise InvalidDomainError(f"domain kind '{kind}' is missing key {e}") from None
        raise InvalidDomainError(f"unknown domain kind '{kind}'")

    def _check_leftover(self, d: dict) -> "DomainSpec":
        if d:
            raise InvalidDomainError(f"unrecognized domain keys: {sorted(d)}")
        return self

    @staticmethod
    def from_json(text: str) -> "DomainSpec":
        try:
            return DomainSpec.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise InvalidDomainError(f"domain JSON does not parse: {e}") from None

    def to_dict(self) -> dict:
        if self.kind == "disk":
            d = {"kind": "disk", "r": self.params[0]}
        elif self.kind == "ellipse":
            d = {"kind": "ellipse", "a": self.params[0], "b": self.params[1]}
        elif self.kind == "annulus":
            d = {"kind": "annulus", "r1": self.params[0], "r2": self.params[1]}
        else:
            d = {"kind": "fourier", "c0": self.params[0],
                 "cos": list(self.params[1]), "sin": list(self.params[2])}
        if self.rho_i is not None:
            d["rho_i"] = self.rho_i
        if self.rho_e is not None:
            d["rho_e"] = self.rho_e
        return d

    def label(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _fourier_radius(theta, c0, cos_coef, sin_coef, deriv=0):
    theta = np.asarray(theta, dtype=float)
    out = np.full_like(theta, c0 if deriv == 0 else 0.0)
    for k, c in enumerate(cos_coef, start=1):
        if deriv == 0:
            out += c * np.cos(k * theta)
        elif deriv == 1:
            out += -c * k * np.sin(k * theta)
        else:
            out += -c * k * k * np.cos(k * theta)
    for k, s in enumerate(sin_coef, start=1):
        if deriv == 0:
            out += s * np.sin(k * theta)
        elif deriv == 1:
            out += s * k * np.cos(k * theta)
        else:
            out += -s * k * k * np.sin(k * theta)
    return out


# ---------------------------------------------------------------------------
# boundary loops


class BoundaryComponent:
    """One closed C^2 loop; ``point``/``deriv1``/``deriv2`` map parameter
    arrays to (k, 2) coordinate arrays."""

    def __init__(self, point, deriv1, deriv2, label: str):
        self.point = point
        self.deriv1 = deriv1
        self.deriv2 = deriv2
        self.label = label

    def speed(self, t):
        d = self.deriv1(t)
        return np.hypot(d[..., 0], d[..., 1])

    def outward_normal(self, t):
        d = self.deriv1(t)
        s = np.hypot(d[..., 0], d[..., 1])
        return np.stack([d[..., 1] / s, -d[..., 0] / s], axis=-1)

    def curvature(self, t):
        """Signed curvature; +1/r on a CCW circle of radius r."""
        d1 = self.deriv1(t)
        d2 = self.deriv2(t)
        s = np.hypot(d1[..., 0], d1[..., 1])
        return (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / s**3

    @cached_property
    def arclength(self) -> float:
        return adaptive_quad(lambda t: self.speed(t), 0.0, TWO_PI, rtol=1e-12)

    @cached_property
    def _arc_table(self):
        # Cumulative arclength on a dense grid, one fixed GL panel per cell;
        # cells are tiny so each panel is accurate to machine precision.
        n = 4096
        tg = np.linspace(0.0, TWO_PI, n + 1)
        seg = np.array([fixed_panel(self.speed, tg[i], tg[i + 1], order=10)
                        for i in range(n)])
        s = np.concatenate([[0.0], np.cumsum(seg)])
        return tg, s

    def arclength_upto(self, t: float) -> float:
        tg, s = self._arc_table
        i = min(int(t / TWO_PI * (len(tg) - 1)), len(tg) - 2)
        return s[i] + fixed_panel(self.speed, tg[i], float(t), order=15)

    def arclength_between(self, t0: float, t1: float) -> float:
        """Arclength from t0 forward to t1 (wrapping once if t1 < t0)."""
        if t1 >= t0:
            return fixed_panel(self.speed, t0, t1, order=15)
        return fixed_panel(self.speed, t0, TWO_PI, order=15) + \
            fixed_panel(self.speed, 0.0, t1, order=15)

    def equal_arclength_params(self, n: int) -> np.ndarray:
        """Parameters of n points splitting the loop into equal-length arcs."""
        tg, s = self._arc_table
        total = s[-1]
        targets = np.arange(n) * total / n
        t = np.interp(targets, s, tg)
        # one Newton polish step: ds/dt = speed
        for _ in range(3):
            resid = np.array([self.arclength_upto(ti) for ti in t]) - targets
            t = t - resid / self.speed(t)
            t = np.clip(t, 0.0, TWO_PI * (1 - 1e-15))
        return t


def _circle_component(r: float, orientation: int, center=(0.0, 0.0)) -> BoundaryComponent:
    cx, cy = center
    o = float(orientation)

    def point(t):
        t = np.asarray(t, dtype=float)
        return np.stack([cx + r * np.cos(o * t), cy + r * np.sin(o * t)], axis=-1)

    def d1(t):
        t = np.asarray(t, dtype=float)
        return np.stack([-r * o * np.sin(o * t), r * o * np.cos(o * t)], axis=-1)

    def d2(t):
        t = np.asarray(t, dtype=float)
        return np.stack([-r * np.cos(o * t), -r * np.sin(o * t)], axis=-1)

    lab = "circle" if orientation > 0 else "circle-cw"
    return BoundaryComponent(point, d1, d2, lab)


def _ellipse_component(a: float, b: float) -> BoundaryComponent:
    def point(t):
        t = np.asarray(t, dtype=float)
        return np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)

    def d1(t):
        t = np.asarray(t, dtype=float)
        return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1)

    def d2(t):
        t = np.asarray(t, dtype=float)
        return np.stack([-a * np.cos(t), -b * np.sin(t)], axis=-1)

    return BoundaryComponent(point, d1, d2, "ellipse")


def _fourier_component(c0, cos_coef, sin_coef) -> BoundaryComponent:
    def parts(t):
        t = np.asarray(t, dtype=float)
        r = _fourier_radius(t, c0, cos_coef, sin_coef)
        r1 = _fourier_radius(t, c0, cos_coef, sin_coef, deriv=1)
        r2 = _fourier_radius(t, c0, cos_coef, sin_coef, deriv=2)
        return t, r, r1, r2, np.cos(t), np.sin(t)

    def point(t):
        t, r, _, _, c, s = parts(t)
        return np.stack([r * c, r * s], axis=-1)

    def d1(t):
        t, r, r1, _, c, s = parts(t)
        return np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)

    def d2(t):
        t, r, r1, r2, c, s = parts(t)
        return np.stack([r2 * c - 2 * r1 * s - r * c,
                         r2 * s + 2 * r1 * c - r * s], axis=-1)

    return BoundaryComponent(point, d1, d2, "fourier")


@dataclass(frozen=True)
class Measures:
    area: float
    perimeter: float
    diameter: float


@dataclass(frozen=True)
class GeometricSummary:
    area: float
    perimeter: float
    diameter: float
    H0: float
    R0: float
    rho_i: float
    rho_e: float
    rho_overridden: bool
    curvature_min: float
    curvature_max: float
    curvature_mean: float
    curvature_std: float
    curvature_l1_dev: float   # integral of |H - H0| over the boundary
    n_components: int


class BoundaryCurve:
    """All boundary loops of a domain plus the membership predicate."""

    def __init__(self, spec: DomainSpec, components: list[BoundaryComponent]):
        self.spec = spec
        self.components = components

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    # -- membership ----------------------------------------------------------

    def inside(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        k = self.spec.kind
        p = self.spec.params
        if k == "disk":
            return x * x + y * y < p[0] ** 2
        if k == "ellipse":
            return (x / p[0]) ** 2 + (y / p[1]) ** 2 < 1.0
        if k == "annulus":
            rr = x * x + y * y
            return (rr > p[0] ** 2) & (rr < p[1] ** 2)
        theta = np.arctan2(y, x)
        rho = _fourier_radius(theta, p[0], p[1], p[2])
        return np.hypot(x, y) < rho

    # -- bulk measures ---------------------------------------------------------

    @cached_property
    def measures(self) -> Measures:
        area = 0.0
        perim = 0.0
        for comp in self.components:
            def green(t, comp=comp):
                g = comp.point(t)
                d = comp.deriv1(t)
                return 0.5 * (g[..., 0] * d[..., 1] - g[..., 1] * d[..., 0])
            area += adaptive_quad(green, 0.0, TWO_PI, rtol=1e-12)
            perim += comp.arclength
        if area <= 0:
            raise DegenerateGeometryError("signed area is not positive; orientation broken")
        return Measures(area=area, perimeter=perim, diameter=self._diameter())

    def _diameter(self) -> float:
        grids = [c.point(np.linspace(0.0, TWO_PI, 2048, endpoint=False))
                 for c in self.components]
        best = (0.0, 0, 0, 0.0, 0.0)
        for i, gi in enumerate(grids):
            for j, gj in enumerate(grids):
                if j < i:
                    continue
                d2 = np.sum((gi[:, None, :] - gj[None, :, :]) ** 2, axis=-1)
                k = int(np.argmax(d2))
                a, b = divmod(k, d2.shape[1])
                if d2[a, b] > best[0]:
                    step = TWO_PI / 2048
                    best = (d2[a, b], i, j, a * step, b * step)
        _, ci, cj, t1, t2 = best
        # local refinement around the best sample pair
        w = TWO_PI / 2048
        for _ in range(8):
            u = np.linspace(t1 - w, t1 + w, 17)
            v = np.linspace(t2 - w, t2 + w, 17)
            pu = self.components[ci].point(u)
            pv = self.components[cj].point(v)
            d2 = np.sum((pu[:, None, :] - pv[None, :, :]) ** 2, axis=-1)
            k = int(np.argmax(d2))
            a, b = divmod(k, 17)
            t1, t2 = u[a], v[b]
            w /= 4.0
        return float(math.dist(self.components[ci].point(t1),
                               self.components[cj].point(t2)))

    # -- curvature statistics ---------------------------------------------------

    def curvature_range(self) -> tuple[float, float]:
        lo, hi = math.inf, -math.inf
        t = np.linspace(0.0, TWO_PI, 8192, endpoint=False)
        for comp in self.components:
            k = comp.curvature(t)
            lo = min(lo, float(np.min(k)))
            hi = max(hi, float(np.max(k)))
        return lo, hi

    def curvature_moments(self) -> tuple[float, float]:
        """Arclength-weighted mean and standard deviation of the curvature."""
        perim = self.measures.perimeter
        mean = sum(adaptive_quad(lambda t, c=c: c.curvature(t) * c.speed(t),
                                 0.0, TWO_PI) for c in self.components) / perim
        # explicit scale: the integrand is pure rounding noise on a circle
        var = sum(adaptive_quad(lambda t, c=c: (c.curvature(t) - mean) ** 2 * c.speed(t),
                                0.0, TWO_PI, scale=perim * (1.0 + mean * mean))
                  for c in self.components) / perim
        return mean, math.sqrt(max(var, 0.0))

    def curvature_l1_deviation(self, href: float) -> float:
        """Integral of |H - href| over the whole boundary."""
        perim = self.measures.perimeter
        return sum(adaptive_quad(lambda t, c=c: np.abs(c.curvature(t) - href) * c.speed(t),
                                 0.0, TWO_PI, scale=perim * (1.0 + abs(href)))
                   for c in self.components)

    def total_curvature(self, component: int = 0) -> float:
        c = self.components[component]
        return adaptive_quad(lambda t: c.curvature(t) * c.speed(t), 0.0, TWO_PI, rtol=1e-12)

    def minkowski_integral(self, z) -> float:
        """Integral of H <x - z, nu> over the boundary (equals the perimeter)."""
        z = np.asarray(z, dtype=float)

        def integrand(t, comp):
            g = comp.point(t)
            nu = comp.outward_normal(t)
            kap = comp.curvature(t)
            dot = (g[..., 0] - z[0]) * nu[..., 0] + (g[..., 1] - z[1]) * nu[..., 1]
            return kap * dot * comp.speed(t)

        return sum(adaptive_quad(lambda t, c=c: integrand(t, c), 0.0, TWO_PI, rtol=1e-12)
                   for c in self.components)

    # -- touching radii -----------------------------------------------------------

    @cached_property
    def touching_radii(self) -> tuple[float, float]:
        """Largest validated interior and exterior tangent ball radii.

        Both searches start from the osculating radius at the curvature
        extremum and halve until a sampled ball-emptiness test passes; the
        result is exact for disks, ellipses, and concentric annuli.  Explicit
        overrides on the spec win.
        """
        if self.spec.rho_i is not None and self.spec.rho_e is not None:
            return self.spec.rho_i, self.spec.rho_e
        lo, hi = self.curvature_range()
        kmax = max(abs(lo), abs(hi))
        start = 1.0 / kmax if kmax > 0 else self.measures.diameter
        floor = TOUCHING_FLOOR_FACTOR * self.measures.diameter

        cloud = np.concatenate([
            c.point(np.linspace(0.0, TWO_PI, _VALIDATE_CLOUD, endpoint=False))
            for c in self.components])
        tt = np.linspace(0.0, TWO_PI, _VALIDATE_TEST_POINTS, endpoint=False)
        xs = np.concatenate([c.point(tt) for c in self.components])
        nus = np.concatenate([c.outward_normal(tt) for c in self.components])

        def valid(rho: float, side: int) -> bool:
            centers = xs - side * rho * nus
            dmin = np.min(np.linalg.norm(cloud[None, :, :] - centers[:, None, :], axis=-1), axis=1)
            if np.any(dmin < rho * (1.0 - 1e-9)):
                return False
            member = self.inside(centers)
            return bool(np.all(member)) if side > 0 else not bool(np.any(member))

        out = []
        for side in (+1, -1):
            rho = start
            while not valid(rho, side):
                rho *= 0.5
                if rho < floor:
                    raise DegenerateGeometryError(
                        "touching radius collapsed below "
                        f"{floor:.3e} ({'interior' if side > 0 else 'exterior'} side)")
            out.append(rho)
        rho_i = self.spec.rho_i if self.spec.rho_i is not None else out[0]
        rho_e = self.spec.rho_e if self.spec.rho_e is not None else out[1]
        return rho_i, rho_e

    # -- summary ---------------------------------------------------------------

    def summary(self) -> GeometricSummary:
        m = self.measures
        H0, R0 = reference_constants(m)
        rho_i, rho_e = self.touching_radii
        kmin, kmax = self.curvature_range()
        kmean, kstd = self.curvature_moments()
        return GeometricSummary(
            area=m.area, perimeter=m.perimeter, diameter=m.diameter,
            H0=H0, R0=R0, rho_i=rho_i, rho_e=rho_e,
            rho_overridden=self.spec.rho_i is not None or self.spec.rho_e is not None,
            curvature_min=kmin, curvature_max=kmax,
            curvature_mean=kmean, curvature_std=kstd,
            curvature_l1_dev=self.curvature_l1_deviation(H0),
            n_components=len(self.components),
        )


def build_boundary(spec: DomainSpec) -> BoundaryCurve:
    """Construct the oriented boundary loops of a validated domain spec."""
    k, p = spec.kind, spec.params
    if k == "disk":
        comps = [_circle_component(p[0], +1)]
    elif k == "ellipse":
        comps = [_ellipse_component(p[0], p[1])]
    elif k == "annulus":
        comps = [_circle_component(p[1], +1), _circle_component(p[0], -1)]
    elif k == "fourier":
        comps = [_fourier_component(p[0], p[1], p[2])]
    else:  # pragma: no cover - DomainSpec constructors reject unknown kinds
        raise InvalidDomainError(f"unknown domain kind '{k}'")
    return BoundaryCurve(spec, comps)


def reference_constants(m: Measures, dim: int = 2) -> tuple[float, float]:
    """Reference mean curvature H0 = |boundary| / (N |domain|) and R0 = 1/H0."""
    H0 = m.perimeter / (dim * m.area)
    return H0, 1.0 / H0
