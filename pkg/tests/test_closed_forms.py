import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptorsion import (
    AnnulusTorsion,
    InvalidDomainError,
    RadialTorsion,
    comparison_envelopes,
    find_rbar,
    gradient_bounds,
    stability_prefactor,
)
from ptorsion.closed_forms import radial_p_function

ALL_P = (1.25, 1.5, 1.75, 2.0)
RNG = np.random.default_rng(20260814)


# -- ball profile ---------------------------------------------------------------


def test_ball_max_values():
    assert RadialTorsion(2.0, 2, 1.0).max_value == pytest.approx(0.25)
    assert RadialTorsion(1.5, 2, 1.0).max_value == pytest.approx(1.0 / 12.0)


@pytest.mark.parametrize("p", ALL_P)
@pytest.mark.parametrize("dim", [2, 3, 5])
def test_ball_ode_residual(p, dim):
    ball = RadialTorsion(p, dim, 1.3)
    rho = RNG.uniform(1e-3, 1.3, size=100)
    assert np.max(np.abs(ball.ode_residual(rho))) < 1e-10


@pytest.mark.parametrize("p", ALL_P)
def test_ball_p_function_constant(p):
    ball = RadialTorsion(p, 2, 1.7)
    rho = RNG.uniform(0.0, 1.7, size=50)
    pf = (2.0 * (p - 1.0) / p * ball.gradient_mag_radial(rho) ** p
          + ball.value_radial(rho))
    q = p / (p - 1.0)
    want = 2.0 * (p - 1.0) / (p * 2.0 ** q) * 1.7 ** q
    assert np.max(np.abs(pf - want)) < 1e-10
    assert ball.p_function_value() == pytest.approx(want, rel=1e-12)
    assert radial_p_function(p, 2, 1.7) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("p", ALL_P)
def test_ball_boundary_identity_exact(p):
    # u_nu/N + H|u_nu|^p vanishes identically on the sphere
    assert abs(RadialTorsion(p, 2, 2.0).boundary_identity_residual()) < 1e-15
    assert abs(RadialTorsion(p, 3, 0.7).boundary_identity_residual()) < 1e-15


def test_ball_gradient_consistent_with_slope():
    ball = RadialTorsion(1.5, 2, 1.0, center=(0.3, -0.2))
    pts = RNG.uniform(-0.4, 0.4, size=(40, 2)) + np.array([0.3, -0.2])
    g = ball.gradient(pts)
    rho = np.linalg.norm(pts - np.array([0.3, -0.2]), axis=1)
    assert np.allclose(np.hypot(g[:, 0], g[:, 1]),
                       ball.gradient_mag_radial(rho), rtol=1e-12)


def test_ball_validation():
    with pytest.raises(InvalidDomainError, match=r"p must be in \(1,2\]"):
        RadialTorsion(2.5, 2, 1.0)
    with pytest.raises(InvalidDomainError, match=r"p must be in \(1,2\]"):
        RadialTorsion(1.0, 2, 1.0)
    with pytest.raises(InvalidDomainError):
        RadialTorsion(1.5, 1, 1.0)
    with pytest.raises(InvalidDomainError):
        RadialTorsion(1.5, 2, -1.0)


# -- annulus profile -------------------------------------------------------------


def test_annulus_laplace_critical_radius_closed_form():
    # p=2: u = (r2^2-r^2)/4 + C log(r/..), max where u'=0 at sqrt((r2^2-r1^2)/(2 log(r2/r1)))
    got = find_rbar(2.0, 2, 1.0, 2.0)
    assert got == pytest.approx(math.sqrt(1.5 / math.log(2.0)), rel=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_annulus_profile_basics(p):
    ann = AnnulusTorsion(p, 2, 1.0, 2.0)
    assert 1.0 < ann.rbar < 2.0
    assert ann.value_radial(1.0)[0] == pytest.approx(0.0, abs=1e-12)
    assert ann.value_radial(2.0)[0] == pytest.approx(0.0, abs=1e-12)
    assert ann.inner_integral(ann.rbar) == pytest.approx(
        ann.outer_integral(ann.rbar), rel=1e-10)
    assert ann.max_value == pytest.approx(ann.inner_integral(ann.rbar))
    assert ann.slope_radial(ann.rbar) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0])
def test_annulus_ode_residual_both_branches(p):
    ann = AnnulusTorsion(p, 2, 1.0, 2.0)
    inner = RNG.uniform(1.001, ann.rbar - 0.01, size=40)
    outer = RNG.uniform(ann.rbar + 0.01, 1.999, size=40)
    assert np.max(np.abs(ann.ode_residual(inner))) < 1e-8
    assert np.max(np.abs(ann.ode_residual(outer))) < 1e-8


def test_find_rbar_monotone_in_outer_radius():
    vals = [find_rbar(1.5, 2, 1.0, r2) for r2 in (1.5, 2.0, 2.5, 3.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@settings(max_examples=30, deadline=None)
@given(st.floats(1.05, 2.0), st.floats(0.3, 2.0), st.floats(0.3, 2.0))
def test_find_rbar_bracketed(p, r1, gap):
    r2 = r1 + gap
    assert r1 < find_rbar(p, 2, r1, r2) < r2


def test_annulus_validation():
    with pytest.raises(InvalidDomainError):
        AnnulusTorsion(1.5, 2, 2.0, 1.0)
    with pytest.raises(InvalidDomainError):
        AnnulusTorsion(3.0, 2, 1.0, 2.0)
    ann = AnnulusTorsion(1.5, 2, 1.0, 2.0)
    with pytest.raises(InvalidDomainError):
        ann.value_radial(0.5)
    with pytest.raises(InvalidDomainError):
        ann.inner_integral(2.5)


# -- a priori bounds -------------------------------------------------------------


def test_gradient_bounds_disk_values():
    lower, upper = gradient_bounds(1.5, 2, 1.0, 1.0, 2.0)
    assert lower == pytest.approx(0.25, rel=1e-12)
    assert upper > lower
    lower, _ = gradient_bounds(2.0, 2, 1.0, 1.0, 2.0)
    assert lower == pytest.approx(0.5, rel=1e-12)


def test_stability_prefactor_value():
    # ellipse(2,1) geometry: exponent p/(p-1) = 3 at p = 1.5, bracket = 20
    assert stability_prefactor(1.5, 2, 0.5, 4.0) == pytest.approx(
        3.0 * 20.0 ** 3, rel=1e-12)


@given(st.floats(1.05, 2.0), st.floats(0.05, 2.0), st.floats(2.0, 10.0))
def test_gradient_bounds_ordered(p, rho, diam_factor):
    # any planar domain satisfies 2 rho_i <= diameter
    lower, upper = gradient_bounds(p, 2, rho, rho, diam_factor * rho)
    assert 0 < lower <= upper


@settings(max_examples=40, deadline=None)
@given(st.floats(1.1, 2.0), st.floats(0.2, 1.5), st.floats(0.0, 1.5),
       st.floats(0.0, 1.0))
def test_comparison_envelopes_ordered(p, r_i, extra, frac):
    r_e = r_i + extra
    inner, outer = comparison_envelopes(p, 2, r_i, r_e)
    x = (frac * r_i, 0.0)
    assert inner.value(x)[0] <= outer.value(x)[0] + 1e-14


def test_comparison_envelopes_validation():
    with pytest.raises(InvalidDomainError):
        comparison_envelopes(1.5, 2, 2.0, 1.0)
