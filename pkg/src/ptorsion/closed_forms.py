"""Closed-form torsion functions of balls and concentric annuli.

These are the exact references the discrete solver is judged against: the
radial solution on a ball (any dimension), the piecewise-radial solution on
an annulus built from one-sided compatibility integrals, and the a priori
gradient bounds obtained by comparison with translated ball/annulus solutions.
Valid for singular exponents 1 < p <= 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidDomainError
from .quadrature import adaptive_quad

P_RANGE_MESSAGE = "p must be in (1,2]"


def _check_p(p: float):
    if not (1.0 < p <= 2.0):
        raise InvalidDomainError(P_RANGE_MESSAGE + f", got {p}")


def _check_dim(dim: int):
    if not (isinstance(dim, (int, np.integer)) and dim >= 2):
        raise InvalidDomainError(f"dimension must be an integer >= 2, got {dim}")


@dataclass(frozen=True)
class RadialTorsion:
    """Torsion function of the ball B_radius(center) in R^dim.

    value(x) = c_p * (radius^q - |x-center|^q) with q = p/(p-1) and
    c_p = (p-1) / (p * dim^(1/(p-1))).
    """

    p: float
    dim: int
    radius: float
    center: tuple = None

    def __post_init__(self):
        _check_p(self.p)
        _check_dim(self.dim)
        if not self.radius > 0:
            raise InvalidDomainError(f"ball radius must be positive, got {self.radius}")
        c = self.center if self.center is not None else (0.0,) * self.dim
        if len(c) != self.dim:
            raise InvalidDomainError("center dimension mismatch")
        object.__setattr__(self, "center", tuple(float(v) for v in c))

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def c_p(self) -> float:
        return (self.p - 1.0) / (self.p * self.dim ** (1.0 / (self.p - 1.0)))

    @property
    def max_value(self) -> float:
        return self.c_p * self.radius ** self.q

    # -- radial profiles ------------------------------------------------------

    def value_radial(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.c_p * (self.radius ** self.q - rho ** self.q)

    def slope_radial(self, rho):
        """du/drho; negative away from the center."""
        rho = np.asarray(rho, dtype=float)
        return -(rho / self.dim) ** (1.0 / (self.p - 1.0))

    def gradient_mag_radial(self, rho):
        rho = np.asarray(rho, dtype=float)
        return (rho / self.dim) ** (1.0 / (self.p - 1.0))

    def curvature_radial(self, rho):
        """d2u/drho2."""
        rho = np.asarray(rho, dtype=float)
        e = 1.0 / (self.p - 1.0)
        return -e / self.dim * (rho / self.dim) ** (e - 1.0)

    def ode_residual(self, rho):
        """Radial p-Laplace residual div(|u'|^(p-2) u' e_r) + 1; zero exactly."""
        rho = np.asarray(rho, dtype=float)
        up = self.slope_radial(rho)
        upp = self.curvature_radial(rho)
        w = np.abs(up) ** (self.p - 2.0)
        return (self.p - 1.0) * w * upp + (self.dim - 1.0) / rho * w * up + 1.0

    # -- cartesian evaluation --------------------------------------------------

    def _rho(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x, np.linalg.norm(x - np.asarray(self.center), axis=-1)

    def value(self, x):
        _, rho = self._rho(x)
        return self.value_radial(rho)

    def gradient(self, x):
        x, rho = self._rho(x)
        d = x - np.asarray(self.center)
        e = 1.0 / (self.p - 1.0)
        coef = -self.dim ** (-e) * rho ** (self.q - 2.0)
        return coef[:, None] * d

    def p_function_value(self) -> float:
        """Constant value of 2(p-1)/p |grad u|^p + 2u/dim on the ball."""
        return 2.0 * (self.p - 1.0) / self.p * self.dim ** (-self.q) * self.radius ** self.q

    def boundary_identity_residual(self) -> float:
        """u_nu/dim + H |u_nu|^p on the boundary sphere; zero exactly."""
        unu = -self.gradient_mag_radial(self.radius)
        H = 1.0 / self.radius
        return unu / self.dim + H * abs(unu) ** self.p


def radial_p_function(p: float, dim: int, radius: float) -> float:
    return RadialTorsion(p, dim, radius).p_function_value()


# ---------------------------------------------------------------------------
# annulus


@dataclass(frozen=True)
class AnnulusTorsion:
    """Torsion function of the annulus r1 < |x| < r2, dimension dim.

    The free constant rbar (radius of the critical sphere where the gradient
    vanishes) is fixed by matching the two one-sided radial integrals.
    """

    p: float
    dim: int
    r1: float
    r2: float

    def __post_init__(self):
        _check_p(self.p)
        _check_dim(self.dim)
        if not (0 < self.r1 < self.r2):
            raise InvalidDomainError(
                f"annulus radii must satisfy 0 < r1 < r2, got {self.r1}, {self.r2}")

    # inner slope function: positive for tau < rbar
    def _g_in(self, tau, rbar):
        N = self.dim
        return rbar ** N / (N * tau ** (N - 1.0)) - tau / N

    def inner_integral(self, rbar: float) -> float:
        """Rise of the radial profile from r1 up to the candidate critical radius."""
        if not (self.r1 <= rbar <= self.r2):
            raise InvalidDomainError("candidate critical radius outside the annulus")
        e = 1.0 / (self.p - 1.0)
        if rbar == self.r1:
            return 0.0
        return adaptive_quad(
            lambda t: np.maximum(self._g_in(t, rbar), 0.0) ** e,
            self.r1, rbar, rtol=1e-12)

    def outer_integral(self, rbar: float) -> float:
        """Fall of the radial profile from the candidate critical radius to r2."""
        if not (self.r1 <= rbar <= self.r2):
            raise InvalidDomainError("candidate critical radius outside the annulus")
        e = 1.0 / (self.p - 1.0)
        if rbar == self.r2:
            return 0.0
        return adaptive_quad(
            lambda t: np.maximum(-self._g_in(t, rbar), 0.0) ** e,
            rbar, self.r2, rtol=1e-12)

    @cached_property
    def rbar(self) -> float:
        """Unique critical radius; root of inner_integral - outer_integral."""
        lo, hi = self.r1, self.r2
        f = lambda r: self.inner_integral(r) - self.outer_integral(r)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-14 * self.r2:
                break
        return 0.5 * (lo + hi)

    @property
    def max_value(self) -> float:
        return self.inner_integral(self.rbar)

    def slope_radial(self, rho):
        rho = np.asarray(rho, dtype=float)
        e = 1.0 / (self.p - 1.0)
        g = self._g_in(rho, self.rbar)
        return np.sign(g) * np.abs(g) ** e

    def curvature_radial(self, rho):
        rho = np.asarray(rho, dtype=float)
        N = self.dim
        e = 1.0 / (self.p - 1.0)
        g = self._g_in(rho, self.rbar)
        gp = -(N - 1.0) * self.rbar ** N / (N * rho ** N) - 1.0 / N
        return e * np.abs(g) ** (e - 1.0) * gp

    def value_radial(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if np.any(rho < self.r1 - 1e-12) or np.any(rho > self.r2 + 1e-12):
            raise InvalidDomainError("evaluation radius outside the annulus")
        e = 1.0 / (self.p - 1.0)
        out = np.empty_like(rho)
        for i, r in enumerate(rho):
            r = min(max(r, self.r1), self.r2)
            if r <= self.rbar:
                out[i] = adaptive_quad(
                    lambda t: np.maximum(self._g_in(t, self.rbar), 0.0) ** e,
                    self.r1, r, rtol=1e-12) if r > self.r1 else 0.0
            else:
                out[i] = adaptive_quad(
                    lambda t: np.maximum(-self._g_in(t, self.rbar), 0.0) ** e,
                    r, self.r2, rtol=1e-12)
        return out

    def ode_residual(self, rho):
        rho = np.asarray(rho, dtype=float)
        up = self.slope_radial(rho)
        upp = self.curvature_radial(rho)
        w = np.abs(up) ** (self.p - 2.0)
        return (self.p - 1.0) * w * upp + (self.dim - 1.0) / rho * w * up + 1.0


def find_rbar(p: float, dim: int, r1: float, r2: float) -> float:
    return AnnulusTorsion(p, dim, r1, r2).rbar


# ---------------------------------------------------------------------------
# a priori bounds and comparison envelopes


def _annulus_bracket(dim: int, rho_e: float, diam: float) -> float:
    """(diam+rho_e)^N / (N rho_e^(N-1)) - rho_e/N; slope scale of the outer
    comparison annulus."""
    N = dim
    return (diam + rho_e) ** N / (N * rho_e ** (N - 1.0)) - rho_e / N


def gradient_bounds(p: float, dim: int, rho_i: float, rho_e: float,
                    diam: float) -> tuple[float, float]:
    """Interior/exterior comparison bounds for |grad u| on the boundary."""
    _check_p(p)
    _check_dim(dim)
    if not (rho_i > 0 and rho_e > 0 and diam > 0):
        raise InvalidDomainError("touching radii and diameter must be positive")
    e = 1.0 / (p - 1.0)
    lower = (rho_i / dim) ** e
    upper = _annulus_bracket(dim, rho_e, diam) ** e
    return lower, upper


def stability_prefactor(p: float, dim: int, rho_e: float, diam: float) -> float:
    """Geometric prefactor of the deficit stability bound against the
    curvature L1 deviation."""
    _check_p(p)
    _check_dim(dim)
    return (p * (dim - 1.0) / (p - 1.0)) * \
        _annulus_bracket(dim, rho_e, diam) ** (p / (p - 1.0))


def comparison_envelopes(p: float, dim: int, r_i: float, r_e: float,
                         center_i=None, center_e=None) -> tuple[RadialTorsion, RadialTorsion]:
    """Ball torsion functions on touching inner/outer balls; the torsion
    function of any domain between the balls lies between them."""
    if not r_i <= r_e:
        raise InvalidDomainError("inner comparison radius exceeds outer")
    return (RadialTorsion(p, dim, r_i, center_i),
            RadialTorsion(p, dim, r_e, center_e))
