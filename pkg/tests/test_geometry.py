import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evosurf.fem import ScalarSpace, interpolate
from evosurf.geometry import (
    div_C,
    div_P,
    element_geometry,
    eval_grad_C,
    eval_grad_P,
    field_div_P,
    field_values,
    frame_at,
    integrate,
)
from evosurf.mesh import displace, make_icosphere, mesh_size

ref_points = st.tuples(st.floats(0, 1), st.floats(0, 1)).map(
    lambda p: (p[0] * (1 - p[1] / 2), p[1] / 2 * (1 - p[0] / 2))
)


def _orders(err, h):
    err, h = np.asarray(err), np.asarray(h)
    return np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])


def test_frame_algebra(sphere1):
    g = element_geometry(sphere1)
    np.testing.assert_allclose(np.linalg.norm(g.nu, axis=-1), 1.0, atol=1e-12)
    assert np.abs(np.einsum("eqij,eqj->eqi", g.P, g.nu)).max() < 1e-12
    PP = np.einsum("eqij,eqjk->eqik", g.P, g.P)
    assert np.abs(PP - g.P).max() < 1e-10
    assert np.abs(np.einsum("eqij,eqj->eqi", g.B, g.nu)).max() < 1e-10
    assert np.abs(np.einsum("eqi,eqij->eqj", g.nu, g.B)).max() < 1e-10
    assert np.array_equal(g.H, np.trace(g.B, axis1=-2, axis2=-1))
    np.testing.assert_allclose(
        g.sqrt_det_g, np.linalg.norm(np.cross(g.J[..., 0], g.J[..., 1]), axis=-1), rtol=1e-14
    )


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 79), ref_points)
def test_normal_is_radial(elem, pt):
    mesh = make_icosphere(1, 3)
    f = frame_at(mesh, elem, pt)
    radial = f.x / np.linalg.norm(f.x)
    # O(h^k) with h ~ 0.6; worst at the vertices
    assert np.linalg.norm(f.nu - radial) < 5e-2
    assert f.nu @ f.x > 0
    assert f.sqrt_det_g > 0


def test_normal_error_order_k():
    k = 3
    err, h = [], []
    for level in (1, 2, 3):
        m = make_icosphere(level, k)
        g = element_geometry(m)
        radial = g.x / np.linalg.norm(g.x, axis=-1, keepdims=True)
        err.append(np.abs(g.nu - radial).max())
        h.append(mesh_size(m))
    assert np.all(_orders(err, h) >= k - 0.2)


def test_mean_curvature_order():
    k = 3
    err, h = [], []
    for level in (1, 2, 3):
        m = make_icosphere(level, k)
        g = element_geometry(m)
        err.append(np.abs(g.H + 2).max())
        h.append(mesh_size(m))
    assert np.all(_orders(err, h) >= k - 1 - 0.1), _orders(err, h)


def test_radius_two_curvature():
    g1 = element_geometry(make_icosphere(2, 3))
    g2 = element_geometry(make_icosphere(2, 3, radius=2.0))
    np.testing.assert_allclose(g2.H, 0.5 * g1.H, rtol=1e-12)
    mean_H = g2.integrate(g2.H) / g2.integrate(np.ones_like(g2.H))
    assert mean_H == pytest.approx(-1.0, abs=3e-2)
    np.testing.assert_allclose(g2.B, -0.5 * g2.P, atol=5e-2)


def test_area_integral_accuracy(sphere2):
    area = integrate(sphere2, 1.0)
    assert area == pytest.approx(sphere2.area())
    # the exact value 4 pi is matched to the O(h^{k+1}) geometry error only
    assert abs(area - 4 * np.pi) < 1e-3


def test_second_moment(sphere2):
    val = integrate(sphere2, lambda g: g.x[..., 0] ** 2)
    assert val == pytest.approx(4 * np.pi / 3, rel=1e-3)
    total = integrate(sphere2, lambda g: np.sum(g.x**2, axis=-1))
    # interior geometry points sit O(h^{k+1}) inside the unit sphere
    assert total == pytest.approx(sphere2.area(), rel=1e-4)


def test_integrate_zero(sphere1):
    assert integrate(sphere1, 0.0) == 0.0


def test_grad_constant_vanishes(sphere1):
    s = ScalarSpace(sphere1, 3)
    c = interpolate(s, lambda x: np.tile([1.0, -2.0, 3.0], (len(x), 1)))
    pt = (0.2, 0.3)
    assert np.abs(eval_grad_C(c, 5, pt)).max() < 1e-12
    assert np.abs(eval_grad_P(c, 5, pt)).max() < 1e-12
    assert abs(div_P(c, 5, pt)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 319), ref_points)
def test_identity_field(elem, pt):
    mesh = make_icosphere(2, 3)
    s = ScalarSpace(mesh, 3)
    ident = interpolate(s, lambda x: x)
    f = frame_at(mesh, elem, pt)
    # x is reproduced exactly by the isoparametric map
    np.testing.assert_allclose(eval_grad_C(ident, elem, pt), f.P, atol=1e-12)
    np.testing.assert_allclose(eval_grad_P(ident, elem, pt), f.P, atol=1e-12)
    assert div_P(ident, elem, pt) == pytest.approx(2.0, abs=1e-12)


def test_scalar_coordinate_gradient(sphere1):
    s = ScalarSpace(sphere1, 3)
    x0 = interpolate(s, lambda x: x[:, 0])
    f = frame_at(sphere1, 7, (0.25, 0.25))
    np.testing.assert_allclose(eval_grad_C(x0, 7, (0.25, 0.25)), f.P[0], atol=1e-12)


def test_normal_field_gradient_is_projection(sphere2):
    s = ScalarSpace(sphere2, 3)
    nu = interpolate(s, lambda x: x / np.linalg.norm(x, axis=1, keepdims=True))
    f = frame_at(sphere2, 11, (0.3, 0.3))
    np.testing.assert_allclose(eval_grad_P(nu, 11, (0.3, 0.3)), f.P, atol=1e-3)
    # B = -Grad_C nu
    np.testing.assert_allclose(f.B, -f.P, atol=1e-2)


def test_killing_field_divergence_free():
    # the interpolant of omega x x is omega x X_h exactly, and tr(P W P) = 0 for skew W
    omega = np.array([0.3, -0.5, 0.8])
    for level in (1, 2, 3):
        m = make_icosphere(level, 3)
        u = interpolate(ScalarSpace(m, 3), lambda x: np.cross(omega, x))
        g = element_geometry(m)
        assert np.sqrt(g.integrate(field_div_P(u, g) ** 2)) < 1e-12
        assert abs(div_P(u, 0, (1 / 3, 1 / 3))) < 1e-13


def test_divergence_integral_identity():
    # int div_P u = -int (u . nu) H on closed surfaces, up to O(h^{k-1})
    def field(x):
        return np.stack([x[:, 0] + x[:, 1] * x[:, 2] ** 2, x[:, 1] ** 3, np.exp(x[:, 2])], axis=1)

    gaps, h = [], []
    for level in (1, 2, 3):
        m = make_icosphere(level, 3)
        u = interpolate(ScalarSpace(m, 3), field)
        g = element_geometry(m)
        un = np.einsum("eqc,eqc->eq", field_values(u, g), g.nu)
        gaps.append(abs(g.integrate(field_div_P(u, g)) + g.integrate(un * g.H)))
        h.append(mesh_size(m))
    assert np.all(_orders(gaps, h) >= 3 - 1 - 0.1), _orders(gaps, h)


def test_identity_on_perturbed_surface():
    m = make_icosphere(2, 3)
    Y = 0.1 * m.nodes[:, [0]] ** 2 * m.nodes
    pm = displace(m, Y)
    u = interpolate(ScalarSpace(pm, 3), lambda x: np.stack([x[:, 1], x[:, 2] ** 2, x[:, 0]], 1))
    g = element_geometry(pm)
    un = np.einsum("eqc,eqc->eq", field_values(u, g), g.nu)
    lhs = g.integrate(field_div_P(u, g))
    assert abs(lhs + g.integrate(un * g.H)) < 1e-3 * max(1.0, abs(lhs))


def test_div_C_of_projection(sphere1):
    # div_C P = H nu  for P = I - nu nu^T on the unit sphere: ambient derivative of x x^T/|x|^2
    f = frame_at(sphere1, 3, (0.2, 0.2))
    x = f.x / np.linalg.norm(f.x)
    r = np.linalg.norm(f.x)
    I = np.eye(3)
    # d/dx_k (x_i x_j / |x|^2) on |x| = r
    d = (np.einsum("ik,j->ijk", I, x) + np.einsum("jk,i->ijk", I, x)) / r - 2 * np.einsum(
        "i,j,k->ijk", x, x, x
    ) / r
    divP = div_C(-d, -d, f)
    np.testing.assert_allclose(divP, -2 * x / r, atol=2e-2)


def test_frame_rejects_outside_point(sphere0):
    with pytest.raises(ValueError):
        frame_at(sphere0, 0, (0.8, 0.8))
