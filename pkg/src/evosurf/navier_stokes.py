"""Semi-implicit step of the normal-penalized surface Navier-Stokes equations.

On the already moved surface S^{n+1}, with the lifted old velocity u_hat
and w = u_hat - Y / tau, find u in V_k^3 and p in V_{k-1} with int p = 0:

    (u, v) + tau ((Grad_C u) w, v) + (2 tau / Re) (sigma(u), Grad_P v)
        - tau (p, div_P v) + beta tau (u . nu, v . nu)
        = (u_hat, v) + tau (b, v) + beta tau (V, v . nu)
    (div_P u, q) = 0

where sigma(u) = sym(Grad_P u) and beta = beta0 / h^2.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ConnectivityMismatch, NonFiniteSolution
from .fem import (
    DirectSolver,
    DiscreteField,
    ScalarSpace,
    SparseSystem,
    assemble_load,
    mass_matrix,
    mean_vector,
    scatter_matrix,
    vectorize,
)
from .geometry import element_geometry, field_grad_P, field_values
from .mesh import mesh_size

logger = logging.getLogger(__name__)


@dataclass
class FlowState:
    u: DiscreteField
    p: DiscreteField
    mesh: object
    t: float = 0.0


@dataclass(frozen=True)
class NSParams:
    Re: float = 1.0
    tau: float = 1e-3
    beta0: float = 100.0
    forcing: Callable = None
    project_w: bool = False
    exact_normal: Callable = None
    mean_constraint: bool = False

    def __post_init__(self):
        if self.Re <= 0 or self.tau <= 0 or self.beta0 <= 0:
            raise ValueError("Re, tau and beta0 must be positive")


def zero_state(mesh, t=0.0):
    k = mesh.order
    return FlowState(
        DiscreteField.zeros(ScalarSpace(mesh, k), 3),
        DiscreteField.zeros(ScalarSpace(mesh, k - 1)),
        mesh,
        t,
    )


def lift_field(u_old, mesh_new):
    """Carry coefficients to ``mesh_new`` through the shared reference chart."""
    old = u_old.space.mesh
    if not old.ref.same_connectivity(mesh_new.ref) or old.order != mesh_new.order:
        raise ConnectivityMismatch("lift between meshes of different connectivity")
    return u_old.on(mesh_new)


def l2_project(space, values, degree=None):
    """L2 projection onto ``space`` of a scalar given at quadrature points."""
    rhs = assemble_load(space, values, degree)
    sol = DirectSolver(SparseSystem(mass_matrix(space, degree), rhs)).solve()
    return DiscreteField(space, sol)


def normal_velocity(mesh_new, Y, tau, degree=None):
    """V = (Y . nu_h) / tau on the new surface, L2-projected onto V_k."""
    Y = Y.on(mesh_new) if Y.space.mesh is not mesh_new else Y
    geo = element_geometry(mesh_new, degree)
    Vq = np.einsum("eqc,eqc->eq", field_values(Y, geo), geo.nu) / tau
    return l2_project(ScalarSpace(mesh_new, mesh_new.order), Vq, degree)


def penalty_normal(geo, params):
    if params.exact_normal is None:
        return geo.nu
    n = np.asarray(params.exact_normal(geo.x), dtype=float)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


class NSSystem:
    """Assembled saddle system of one step (kept for residual checks)."""

    def __init__(self, mesh, u_hat, w_q, V, params, t_new, degree=None, backend=None):
        k = mesh.order
        self.vspace = ScalarSpace(mesh, k)
        self.pspace = ScalarSpace(mesh, k - 1)
        geo = element_geometry(mesh, degree)
        self.geo = geo
        tau = params.tau
        self.h = mesh_size(mesh)
        self.beta = params.beta0 / self.h**2
        nu = penalty_normal(geo, params)
        phi, G = geo.basis(k)
        psi, _ = geo.basis(k - 1)
        if params.project_w:
            w_q = np.einsum("eqab,eqb->eqa", geo.P, w_q)
        A_loc, D_loc = kernels.ns_element_matrices(
            phi, G, psi, nu, geo.P, w_q, geo.dA, tau, tau / params.Re, self.beta * tau,
            backend=backend,
        )
        nu_, np_ = self.vspace.dof_count, self.pspace.dof_count
        lv = self.vspace.l2g_vector()
        A = scatter_matrix(A_loc, lv, lv, (3 * nu_, 3 * nu_))
        D = scatter_matrix(D_loc, self.pspace.l2g, lv, (np_, 3 * nu_))
        self.D = D
        M = sp.bmat([[A, -tau * D.T], [-tau * D, None]], format="csr")
        rhs_u = vectorize(mass_matrix(self.vspace, degree)) @ u_hat.values.reshape(-1)
        if params.forcing is not None:
            bq = np.asarray(params.forcing(geo.x, t_new), dtype=float)
            rhs_u = rhs_u + tau * assemble_load(self.vspace, bq, degree, components=3)
        if V is not None:
            Vq = field_values(V, geo)[..., None] * nu
            rhs_u = rhs_u + self.beta * tau * assemble_load(self.vspace, Vq, degree, components=3)
        rhs = np.concatenate([rhs_u, np.zeros(np_)])
        # a constant pressure pushes normally (int div_P v = -int (v . nu) H),
        # so it is determined by the step; the mean row is optional
        constraint = None
        if params.mean_constraint:
            constraint = np.concatenate([np.zeros(3 * nu_), mean_vector(self.pspace, degree)])
        self.system = SparseSystem(M, rhs, constraint)

    def solve(self):
        solver = DirectSolver(self.system)
        x = solver.solve()
        if not np.all(np.isfinite(x)):
            raise NonFiniteSolution("non-finite velocity or pressure")
        n3 = 3 * self.vspace.dof_count
        u = DiscreteField(self.vspace, x[:n3].reshape(-1, 3))
        p = DiscreteField(self.pspace, x[n3:])
        return u, p

    def divergence_residual(self, u):
        """max_q |(div_P u, q)| over pressure basis functions."""
        return float(np.abs(self.D @ u.values.reshape(-1)).max())


def ns_step(state, mesh_new, Y, V_new, params, degree=None, backend=None, return_system=False):
    """One linear solve advancing ``state`` from S^n to ``mesh_new`` = S^{n+1}."""
    u_hat = lift_field(state.u, mesh_new)
    geo = element_geometry(mesh_new, degree)
    w_q = field_values(u_hat, geo)
    if Y is not None:
        w_q = w_q - field_values(Y.on(mesh_new), geo) / params.tau
    if V_new is not None and V_new.space.mesh is not mesh_new:
        V_new = V_new.on(mesh_new)
    t_new = state.t + params.tau
    nss = NSSystem(mesh_new, u_hat, w_q, V_new, params, t_new, degree, backend)
    u, p = nss.solve()
    new = FlowState(u, p, mesh_new, t_new)
    return (new, nss) if return_system else new


# --- diagnostics ------------------------------------------------------------

def kinetic_energy(u, degree=None):
    """int |u|^2 (no factor 1/2)."""
    geo = element_geometry(u.space.mesh, degree)
    v = field_values(u, geo)
    return geo.integrate(np.sum(v * v, axis=-1))


def div_error(u, degree=None):
    """|| div_P u ||_{L2}."""
    geo = element_geometry(u.space.mesh, degree)
    d = np.trace(field_grad_P(u, geo), axis1=-2, axis2=-1)
    return float(np.sqrt(geo.integrate(d * d)))


def normal_error(u, V, degree=None, normal=None):
    """|| u . nu_h - V ||_{L2}."""
    geo = element_geometry(u.space.mesh, degree)
    nu = geo.nu if normal is None else normal
    r = np.einsum("eqc,eqc->eq", field_values(u, geo), nu)
    if V is not None:
        r = r - field_values(V, geo)
    return float(np.sqrt(geo.integrate(r * r)))


def viscous_energy(u, degree=None):
    """(sigma(u), sigma(u)) with sigma = sym(Grad_P u)."""
    geo = element_geometry(u.space.mesh, degree)
    g = field_grad_P(u, geo)
    s = 0.5 * (g + np.swapaxes(g, -1, -2))
    return geo.integrate(np.sum(s * s, axis=(-1, -2)))


def pressure_mean(p, degree=None):
    geo = element_geometry(p.space.mesh, degree)
    return geo.integrate(field_values(p, geo))


def nodal_normals(space):
    """Area-weighted average of element normals at the Lagrange nodes."""
    from . import lagrange
    from .geometry import ElementGeometry

    geo = ElementGeometry(space.mesh, lagrange.reference_nodes(space.order))
    acc = np.zeros((space.dof_count, 3))
    np.add.at(acc, space.l2g.ravel(), (geo.normal_raw).reshape(-1, 3))
    return acc / np.linalg.norm(acc, axis=1, keepdims=True)


def random_velocity(mesh, seed, params, cleanup_tau=1.0, degree=None):
    """Random start field, projected onto discretely tangential, solenoidal fields.

    I.i.d. uniform [-0.5, 0.5] nodal components with the nodal normal part
    removed, then one projection step: no viscosity, no convection, V = 0.
    Without those terms ``cleanup_tau`` only weights the penalty against
    the mass term, so beta * cleanup_tau >> 1 makes the result tangential.
    """
    rng = np.random.default_rng(seed)
    space = ScalarSpace(mesh, mesh.order)
    vals = rng.uniform(-0.5, 0.5, size=(space.dof_count, 3))
    n = nodal_normals(space)
    vals -= np.sum(vals * n, axis=1, keepdims=True) * n
    u0 = DiscreteField(space, vals)
    clean = NSParams(Re=np.inf, tau=cleanup_tau, beta0=params.beta0,
                     exact_normal=params.exact_normal)
    geo = element_geometry(mesh, degree)
    nss = NSSystem(mesh, u0, np.zeros_like(geo.x), None, clean, 0.0, degree)
    u, p = nss.solve()
    return FlowState(u, p, mesh, 0.0)
