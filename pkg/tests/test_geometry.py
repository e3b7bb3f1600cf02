import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heattube.geometry import (
    GeometryError,
    ShapeCoefficients,
    boundary_sample,
    build_mesh,
    legendre_basis,
    legendre_basis_derivative,
    radius,
)


@pytest.mark.parametrize("T", [1.0, 2.5])
def test_legendre_orthonormal_on_interval(T):
    x, w = np.polynomial.legendre.leggauss(20)
    t = 0.5 * T * (x + 1)
    L = legendre_basis(t, 6, T)
    gram = (L * (0.5 * T * w)) @ L.T
    assert np.allclose(gram, np.eye(7), atol=1e-13)


def test_legendre_endpoint_values():
    L = legendre_basis(np.array([0.0, 1.0]), 4)
    l = np.arange(5)
    assert np.allclose(L[:, 1], np.sqrt(2 * l + 1))
    assert np.allclose(L[:, 0], (-1.0) ** l * np.sqrt(2 * l + 1))


def test_legendre_derivative_matches_differences():
    t = np.linspace(0.1, 0.9, 7)
    h = 1e-6
    fd = (legendre_basis(t + h, 5) - legendre_basis(t - h, 5)) / (2 * h)
    assert np.allclose(legendre_basis_derivative(t, 5), fd, atol=1e-7)


def test_column_layout():
    c = ShapeCoefficients(0, 3)
    assert c.column_modes() == [("sin", 2), ("sin", 1), ("cos", 0), ("cos", 1), ("cos", 2), ("cos", 3)]
    phi = np.array([0.3])
    assert np.allclose(c.trig_stack(phi)[:, 0], [np.sin(0.6), np.sin(0.3), 1, np.cos(0.3), np.cos(0.6), np.cos(0.9)])
    with pytest.raises(IndexError):
        c.set_beta(3, 0, 1.0)


def test_circle_mesh_conventions():
    r, R = 0.4, 1.3
    m = build_mesh(ShapeCoefficients.circle(r, 1, 2), R, 5, 16)
    inner, ext = m.component(0), m.component(1)
    phi = m.angles
    assert np.allclose(m.x[:, inner], r * np.cos(phi))
    # normals point into the void on the interior, outward on the exterior
    assert np.allclose(m.nx[:, inner], -np.cos(phi))
    assert np.allclose(m.ny[:, inner], -np.sin(phi))
    assert np.allclose(m.nx[:, ext], np.cos(phi))
    assert np.allclose(m.curv[:, inner], 1 / r)
    assert np.allclose(m.curv[:, ext], -1 / R)
    assert np.allclose(m.arc[:, inner], r)
    assert np.allclose(m.arc[:, ext], R)
    assert np.allclose(m.vn, 0.0)


def test_expanding_circle_velocity():
    c = ShapeCoefficients(1, 1)
    c.set_alpha(0, 0, 0.375)
    c.set_alpha(0, 1, 0.15 / (2 * math.sqrt(3)))          # w = 0.3 + 0.15 t
    m = build_mesh(c, 1.0, 4, 8)
    assert np.allclose(m.radius, 0.3 + 0.15 * m.times[:, None])
    # boundary moves away from the void normal
    assert np.allclose(m.vn[:, :8], -0.15)


def _shape():
    c = ShapeCoefficients(2, 4)
    c.set_alpha(0, 0, 0.45)
    c.set_alpha(2, 0, 0.06)
    c.set_alpha(3, 1, 0.02)
    c.set_beta(1, 2, 0.03)
    c.set_alpha(0, 1, 0.05)
    return c


def test_curvature_and_normal_against_finite_differences():
    c = _shape()
    t = 0.63
    phi = np.linspace(0, 2 * np.pi, 13)[:-1]
    d = 1e-4

    def point(p):
        w, _, _ = radius(c, t, p)
        return np.array([w * np.cos(p), w * np.sin(p)])

    p0, pp, pm = point(phi), point(phi + d), point(phi - d)
    d1 = (pp - pm) / (2 * d)
    d2 = (pp - 2 * p0 + pm) / d**2
    speed = np.hypot(*d1)
    kappa = (d1[0] * d2[1] - d1[1] * d2[0]) / speed**3
    m = build_mesh(c, 1.0, 100, 12)
    n = 63
    assert m.times[n] == pytest.approx(t)
    assert np.allclose(m.curv[n, :12], kappa, rtol=1e-6)
    # inward normal = tangent rotated by +90 degrees for counter-clockwise curves
    tx, ty = d1 / speed
    assert np.allclose(m.nx[n, :12], -ty, atol=1e-7)
    assert np.allclose(m.ny[n, :12], tx, atol=1e-7)
    assert np.allclose(m.arc[n, :12], speed, rtol=1e-7)


def test_normal_velocity_against_finite_differences():
    c = _shape()
    t, d = 0.4, 1e-6
    phi = np.linspace(0, 2 * np.pi, 9)[:-1]
    s = [boundary_sample(c, t, p) for p in phi]
    for p, smp in zip(phi, s):
        w1, _, _ = radius(c, t + d, p)
        w0, _, _ = radius(c, t - d, p)
        vel = (w1 - w0) / (2 * d) * np.array([np.cos(p), np.sin(p)])
        assert smp.normal_velocity == pytest.approx(float(vel @ smp.unit_normal), abs=1e-8)


def test_fft_and_direct_paths_agree():
    c = _shape()
    a = build_mesh(c, 1.0, 6, 32, use_fft=True)
    b = build_mesh(c, 1.0, 6, 32, use_fft=False)
    for name in ("x", "y", "nx", "ny", "arc", "vn", "curv"):
        assert np.allclose(getattr(a, name), getattr(b, name), atol=1e-14)


def test_boundary_sample_matches_mesh():
    c = _shape()
    m = build_mesh(c, 1.0, 10, 24)
    s = m.sample(7, 0, 5)
    ref = boundary_sample(c, m.times[7], m.angles[5])
    assert np.allclose(s.point, ref.point)
    assert np.allclose(s.unit_normal, ref.unit_normal)
    assert s.curvature == pytest.approx(ref.curvature)
    assert s.normal_velocity == pytest.approx(ref.normal_velocity)


def test_time_reversal_is_an_involution():
    m = build_mesh(_shape(), 1.0, 9, 16)
    r = m.time_reversed()
    assert np.array_equal(r.x, m.x[::-1])
    assert np.array_equal(r.vn, -m.vn[::-1])
    rr = r.time_reversed()
    for name in ("x", "y", "nx", "ny", "arc", "vn", "curv", "radius"):
        assert np.array_equal(getattr(rr, name), getattr(m, name))
    assert rr.reversed_time == m.reversed_time


@pytest.mark.parametrize("r", [0.0, -0.1, 1.0, 1.2])
def test_inadmissible_radius_raises(r):
    with pytest.raises(GeometryError):
        build_mesh(ShapeCoefficients.circle(r, 0, 1), 1.0, 4, 8)


def test_resized_keeps_shape_and_rejects_truncation():
    c = _shape()
    big = c.resized(4, 6)
    phi = np.linspace(0, 6, 11)
    assert np.allclose(radius(big, 0.3, phi)[0], radius(c, 0.3, phi)[0])
    back = big.resized(2, 4)
    assert np.array_equal(back.coeffs, c.coeffs)
    with pytest.raises(ValueError):
        c.resized(0, 4)


coef = st.floats(-0.03, 0.03, allow_nan=False)


@settings(max_examples=25, deadline=None)
@given(st.lists(coef, min_size=18, max_size=18), st.floats(0.25, 0.6))
def test_random_shapes_give_unit_normals(vals, r0):
    c = ShapeCoefficients.from_vector(np.array(vals), 2, 3)
    c.coeffs[0, c.alpha_column(0)] += r0
    m = build_mesh(c, 1.0, 4, 16)
    assert np.allclose(np.hypot(m.nx, m.ny), 1.0)
    assert np.all(m.arc > 0)
    v = c.to_vector()
    assert np.array_equal(ShapeCoefficients.from_vector(v, 2, 3).coeffs, c.coeffs)
