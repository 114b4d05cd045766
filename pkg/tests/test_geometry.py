import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ellipe

from ptorsion import (
    DomainSpec,
    InvalidDomainError,
    build_boundary,
    reference_constants,
)

TWO_PI = 2.0 * math.pi


# -- spec validation ---------------------------------------------------------


@pytest.mark.parametrize("bad", [
    lambda: DomainSpec.disk(0.0),
    lambda: DomainSpec.disk(-1.0),
    lambda: DomainSpec.ellipse(1.0, 2.0),   # a < b
    lambda: DomainSpec.ellipse(1.0, 0.0),
    lambda: DomainSpec.annulus(2.0, 1.0),
    lambda: DomainSpec.annulus(0.0, 1.0),
    lambda: DomainSpec.fourier(1.0, cos_coef=(1.5,)),  # radius crosses zero
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(InvalidDomainError):
        bad()


def test_spec_json_round_trip():
    for spec in (DomainSpec.disk(1.5),
                 DomainSpec.ellipse(2.0, 1.0, rho_i=0.4),
                 DomainSpec.annulus(1.0, 2.0),
                 DomainSpec.fourier(1.0, (0.0, 0.1), (0.05,))):
        again = DomainSpec.from_json(json.dumps(spec.to_dict()))
        assert again == spec


def test_from_dict_rejects_junk():
    with pytest.raises(InvalidDomainError):
        DomainSpec.from_dict({"kind": "square", "side": 1.0})
    with pytest.raises(InvalidDomainError):
        DomainSpec.from_dict({"kind": "disk", "r": 1.0, "colour": "red"})
    with pytest.raises(InvalidDomainError):
        DomainSpec.from_json("not json")


@given(st.floats(0.1, 10))
def test_disk_spec_round_trip_any_radius(r):
    spec = DomainSpec.disk(r)
    assert DomainSpec.from_json(json.dumps(spec.to_dict())) == spec


# -- measures ----------------------------------------------------------------


def test_disk_measures():
    m = build_boundary(DomainSpec.disk(1.0)).measures
    assert m.area == pytest.approx(math.pi, rel=1e-10)
    assert m.perimeter == pytest.approx(TWO_PI, rel=1e-10)
    assert m.diameter == pytest.approx(2.0, rel=1e-8)


def test_annulus_measures():
    m = build_boundary(DomainSpec.annulus(1.0, 2.0)).measures
    assert m.area == pytest.approx(3.0 * math.pi, rel=1e-10)
    assert m.perimeter == pytest.approx(6.0 * math.pi, rel=1e-10)
    assert m.diameter == pytest.approx(4.0, rel=1e-8)


def test_ellipse_measures_against_elliptic_integral():
    m = build_boundary(DomainSpec.ellipse(2.0, 1.0)).measures
    assert m.area == pytest.approx(TWO_PI, rel=1e-10)
    assert m.perimeter == pytest.approx(8.0 * ellipe(0.75), rel=1e-10)
    assert m.perimeter == pytest.approx(9.688448, abs=1e-6)
    assert m.diameter == pytest.approx(4.0, rel=1e-8)


def test_reference_constants():
    for r in (0.5, 1.0, 3.0):
        H0, R0 = reference_constants(build_boundary(DomainSpec.disk(r)).measures)
        assert H0 == pytest.approx(1.0 / r, rel=1e-10)
        assert R0 == pytest.approx(r, rel=1e-10)
    H0, _ = reference_constants(build_boundary(DomainSpec.ellipse(2.0, 1.0)).measures)
    assert H0 == pytest.approx(0.77098, abs=1e-5)
    H0, _ = reference_constants(build_boundary(DomainSpec.annulus(1.0, 2.0)).measures)
    assert H0 == pytest.approx(1.0, rel=1e-10)


# -- curvature ---------------------------------------------------------------


def test_disk_curvature_constant():
    curve = build_boundary(DomainSpec.disk(2.0))
    t = np.linspace(0, TWO_PI, 64)
    assert np.allclose(curve.components[0].curvature(t), 0.5, atol=1e-12)


def test_ellipse_curvature_matches_parametric_formula():
    curve = build_boundary(DomainSpec.ellipse(2.0, 1.0))
    t = np.linspace(0, TWO_PI, 97)
    got = curve.components[0].curvature(t)
    want = 2.0 / (4.0 * np.sin(t) ** 2 + np.cos(t) ** 2) ** 1.5
    assert np.allclose(got, want, rtol=1e-12)
    assert curve.components[0].curvature(0.0) == pytest.approx(2.0)


def test_annulus_inner_curvature_negative():
    curve = build_boundary(DomainSpec.annulus(1.0, 2.0))
    t = np.linspace(0, TWO_PI, 32)
    kap = [c.curvature(t) for c in curve.components]
    vals = sorted(float(np.mean(k)) for k in kap)
    assert vals[0] == pytest.approx(-1.0, rel=1e-12)   # hole boundary
    assert vals[1] == pytest.approx(0.5, rel=1e-12)


def test_fourier_degenerate_case_is_a_circle():
    flat = build_boundary(DomainSpec.fourier(1.0))
    circle = build_boundary(DomainSpec.disk(1.0))
    t = np.linspace(0, TWO_PI, 257)
    assert np.max(np.abs(flat.components[0].point(t)
                         - circle.components[0].point(t))) < 1e-12
    assert flat.measures.area == pytest.approx(math.pi, rel=1e-12)


# -- normals and orientation ---------------------------------------------------


def test_outward_normals_point_out():
    for name, spec in [("disk", DomainSpec.disk(1.0)),
                       ("ellipse", DomainSpec.ellipse(2.0, 1.0)),
                       ("annulus", DomainSpec.annulus(1.0, 2.0)),
                       ("blob", DomainSpec.fourier(1.0, (0.0, 0.12)))]:
        curve = build_boundary(spec)
        t = np.linspace(0, TWO_PI, 128, endpoint=False)
        for comp in curve.components:
            x = comp.point(t)
            nu = comp.outward_normal(t)
            stepped = x + 1e-6 * nu
            assert not np.any(curve.inside(stepped)), name


# -- touching radii -----------------------------------------------------------


def test_touching_radii():
    assert build_boundary(DomainSpec.disk(1.0)).touching_radii == \
        pytest.approx((1.0, 1.0), rel=1e-9)
    assert build_boundary(DomainSpec.ellipse(2.0, 1.0)).touching_radii == \
        pytest.approx((0.5, 0.5), rel=1e-9)
    assert build_boundary(DomainSpec.annulus(1.0, 2.0)).touching_radii == \
        pytest.approx((0.5, 1.0), rel=1e-9)


def test_touching_radius_override_recorded():
    curve = build_boundary(DomainSpec.ellipse(2.0, 1.0, rho_i=0.3, rho_e=0.4))
    assert curve.touching_radii == (0.3, 0.4)
    assert curve.summary().rho_overridden


# -- integral identities --------------------------------------------------------


@pytest.mark.parametrize("name", ["disk", "ellipse", "annulus", "blob"])
def test_minkowski_integral_equals_perimeter(name, lab):
    curve = lab.curve(name)
    perim = curve.measures.perimeter
    for z in ((0.0, 0.0), (0.31, -0.17)):
        assert curve.minkowski_integral(z) == pytest.approx(perim, rel=1e-8)


@pytest.mark.parametrize("name", ["disk", "ellipse", "blob"])
def test_total_curvature_is_two_pi(name, lab):
    assert lab.curve(name).total_curvature(0) == pytest.approx(TWO_PI, rel=1e-8)


def test_constant_curvature_forces_reference_value(lab):
    # H constant on the boundary implies H = H0
    s = lab.summary("disk")
    assert s.curvature_std < 1e-10
    assert s.curvature_mean == pytest.approx(s.H0, abs=1e-8)


def test_summary_fields_consistent(lab):
    for name in ("disk", "ellipse", "annulus", "blob"):
        s = lab.summary(name)
        assert s.H0 == pytest.approx(s.perimeter / (2.0 * s.area), rel=1e-12)
        assert s.R0 == pytest.approx(1.0 / s.H0, rel=1e-12)
        assert 0 < s.rho_i <= 1.0 / max(abs(s.curvature_min), abs(s.curvature_max)) + 1e-12
        assert s.rho_e > 0
        assert s.curvature_l1_dev >= 0
