import numpy as np
import pytest

from evosurf import kernels
from evosurf.errors import ConnectivityMismatch
from evosurf.fem import DiscreteField, ScalarSpace, interpolate, l2_norm
from evosurf.geometry import element_geometry, field_values
from evosurf.mesh import displace, make_icosphere
from evosurf.navier_stokes import (
    FlowState,
    NSParams,
    NSSystem,
    div_error,
    kinetic_energy,
    lift_field,
    normal_error,
    normal_velocity,
    ns_step,
    pressure_mean,
    random_velocity,
    viscous_energy,
    zero_state,
)

OMEGA = np.array([0.0, 0.0, 1.0])


def rotation(mesh, omega=OMEGA):
    return interpolate(ScalarSpace(mesh, mesh.order), lambda x: np.cross(omega, x))


def with_velocity(mesh, u):
    st = zero_state(mesh)
    return FlowState(u, st.p, mesh, 0.0)


def test_zero_data_zero_solution(sphere1):
    out = ns_step(zero_state(sphere1), sphere1, None, None, NSParams())
    assert np.abs(out.u.values).max() == 0.0
    assert np.abs(out.p.values).max() == 0.0
    assert out.t == pytest.approx(1e-3)


def test_zero_displacement_zero_solution(sphere1):
    s = ScalarSpace(sphere1, 3)
    Y = DiscreteField.zeros(s, 3)
    V = DiscreteField.zeros(s)
    out = ns_step(zero_state(sphere1), sphere1, Y, V, NSParams(Re=10))
    assert np.abs(out.u.values).max() < 1e-14


def test_rotation_one_step(sphere2):
    u0 = rotation(sphere2)
    out, nss = ns_step(with_velocity(sphere2, u0), sphere2, None, None, NSParams(Re=10), return_system=True)
    e0 = kinetic_energy(u0)
    assert kinetic_energy(out.u) == pytest.approx(8 * np.pi / 3, rel=1e-2)
    assert abs(kinetic_energy(out.u) - e0) / e0 < 1e-3
    assert nss.divergence_residual(out.u) <= 1e-9 * l2_norm(out.u)


def test_rotation_is_stress_free_in_assembled_system(sphere1):
    # viscous part of the assembled operator annihilates a Killing field
    u0 = rotation(sphere1)
    g = element_geometry(sphere1)
    zero_w = np.zeros_like(g.x)
    viscous = NSSystem(sphere1, u0, zero_w, None, NSParams(Re=1.0, tau=1.0), 1.0)
    inviscid = NSSystem(sphere1, u0, zero_w, None, NSParams(Re=np.inf, tau=1.0), 1.0)
    n3 = 3 * viscous.vspace.dof_count
    diff = (viscous.system.matrix - inviscid.system.matrix)[:n3, :n3]
    assert np.abs(diff @ u0.coefficients).max() < 1e-12
    assert viscous_energy(u0) < 1e-20
    assert div_error(u0) < 1e-12


def test_discrete_incompressibility(sphere1):
    u0 = interpolate(ScalarSpace(sphere1, 3), lambda x: np.stack([x[:, 1] ** 2, x[:, 0], x[:, 2]], 1))
    out, nss = ns_step(with_velocity(sphere1, u0), sphere1, None, None, NSParams(), return_system=True)
    assert nss.divergence_residual(out.u) <= 1e-9 * l2_norm(out.u)


def test_mean_constraint_option(sphere1):
    u0 = interpolate(ScalarSpace(sphere1, 3), lambda x: np.stack([x[:, 1] ** 2, x[:, 0], x[:, 2]], 1))
    out = ns_step(with_velocity(sphere1, u0), sphere1, None, None, NSParams(mean_constraint=True))
    assert abs(pressure_mean(out.p)) <= 1e-9 * np.sqrt(sphere1.area()) * l2_norm(out.p)


def test_penalty_block_psd(sphere0):
    g = element_geometry(sphere0)
    phi, G = g.basis(3)
    psi, _ = g.basis(2)
    zero_w = np.zeros_like(g.x)
    A_pen, _ = kernels.ns_element_matrices(phi, 0 * G, psi, g.nu, g.P, zero_w, g.dA, 0.0, 0.0, 1.0)
    A_mass, _ = kernels.ns_element_matrices(phi, 0 * G, psi, g.nu, g.P, zero_w, g.dA, 0.0, 0.0, 0.0)
    pen = A_pen - A_mass
    s = ScalarSpace(sphere0, 3)
    lv = s.l2g_vector()
    from evosurf.fem import scatter_matrix

    P = scatter_matrix(pen, lv, lv, (3 * s.dof_count,) * 2).toarray()
    np.testing.assert_allclose(P, P.T, atol=1e-14)
    ev = np.linalg.eigvalsh(P)
    assert ev.min() > -1e-12 * ev.max()


def test_backends_agree(sphere1):
    g = element_geometry(sphere1)
    phi, G = g.basis(3)
    psi, _ = g.basis(2)
    w = np.random.default_rng(0).standard_normal(g.x.shape)
    args = (phi, G, psi, g.nu, g.P, w, g.dA, 1e-3, 1e-2, 3.0)
    Ap, Dp = kernels.ns_element_matrices(*args, backend="python")
    for name in kernels.backends():
        A, D = kernels.ns_element_matrices(*args, backend=name)
        np.testing.assert_allclose(A, Ap, atol=1e-12 * np.abs(Ap).max())
        np.testing.assert_allclose(D, Dp, atol=1e-12 * np.abs(Dp).max())


def test_penalty_reduces_normal_error():
    # larger beta0 enforces u . nu = V more tightly
    m = make_icosphere(1, 3)
    s = ScalarSpace(m, 3)
    V = interpolate(s, lambda x: x[:, 0] * x[:, 1])
    errs = []
    for beta0 in (10.0, 100.0, 1000.0):
        out = ns_step(zero_state(m), m, None, V, NSParams(tau=0.1, beta0=beta0))
        errs.append(normal_error(out.u, V))
    assert errs[0] > errs[1] > errs[2]


def test_lift_identity_and_zero(sphere1):
    u = rotation(sphere1)
    assert np.array_equal(lift_field(u, sphere1).values, u.values)
    z = DiscreteField.zeros(ScalarSpace(sphere1, 3), 3)
    assert np.all(lift_field(z, sphere1).values == 0)


def test_lift_to_larger_sphere(sphere2):
    c = interpolate(ScalarSpace(sphere2, 3), lambda x: np.tile([0.0, 2.0, 0.0], (len(x), 1)))
    big = displace(sphere2, 0.1 * sphere2.nodes)
    lifted = lift_field(c, big)
    assert l2_norm(lifted) / l2_norm(c) == pytest.approx(1.1, rel=1e-12)


def test_lift_mismatch(sphere1, sphere0):
    with pytest.raises(ConnectivityMismatch):
        lift_field(rotation(sphere1), sphere0)


def test_kinetic_energy_examples(sphere2):
    s = ScalarSpace(sphere2, 3)
    assert kinetic_energy(DiscreteField.zeros(s, 3)) == 0.0
    assert kinetic_energy(rotation(sphere2)) == pytest.approx(8 * np.pi / 3, rel=1e-4)
    unit = interpolate(s, lambda x: np.tile([0.6, 0.0, 0.8], (len(x), 1)))
    assert kinetic_energy(unit) == pytest.approx(sphere2.area(), rel=1e-13)


def test_diagnostics_of_simple_fields(sphere2):
    s = ScalarSpace(sphere2, 3)
    const = interpolate(s, lambda x: np.tile([1.0, 2.0, 3.0], (len(x), 1)))
    assert div_error(const) < 1e-12
    V = interpolate(s, lambda x: x[:, 0] ** 2)
    uVn = interpolate(s, lambda x: x[:, [0]] ** 2 * x)
    assert normal_error(uVn, V) < 1e-3


def test_normal_velocity_of_radial_motion(sphere2):
    s = ScalarSpace(sphere2, 3)
    Y = interpolate(s, lambda x: 0.01 * x)
    new = displace(sphere2, Y)
    V = normal_velocity(new, Y, 0.01)
    np.testing.assert_allclose(V.values, 1.0, atol=1e-3)


def test_random_velocity_deterministic(sphere1):
    a = random_velocity(sphere1, 7, NSParams())
    b = random_velocity(sphere1, 7, NSParams())
    c = random_velocity(sphere1, 8, NSParams())
    assert np.array_equal(a.u.values, b.u.values)
    assert not np.array_equal(a.u.values, c.u.values)
    assert normal_error(a.u, None) < 0.05 * l2_norm(a.u)


def test_params_validation():
    with pytest.raises(ValueError):
        NSParams(Re=0.0)
