"""Area-conserving surface evolution with tangential mesh regularization.

Each step solves, on the current surface S^n, for a displacement Y and a
curvature field H in V_k:

    (Y . nu, w) - tau alpha (H, w) = (tau f - c, w)
    (H nu, Z) + (Grad_C Y, Grad_C Z) = -(Grad_C X, Grad_C Z)

i.e. Y . nu = tau V0(H) - c and H nu = Delta_C (X + Y) weakly.  The
scalar c shifts the normal speed until the linearised area change
int (Y . nu) H / int H vanishes.
"""
import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import ConnectivityMismatch, NoConvergence, ZeroMeanCurvature
from .fem import (
    DirectSolver,
    DiscreteField,
    ScalarSpace,
    SparseSystem,
    assemble_load,
    mass_matrix,
    mean_vector,
    scatter_matrix,
    stiffness_matrix,
    vectorize,
)
from .geometry import element_geometry, field_values
from .mesh import displace, mesh_size

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalVelocitySpec:
    """Prescribed normal speed V0(H)(x, t) = alpha * H + forcing(x, t)."""

    alpha: float = 0.0
    forcing: Callable = None

    def f(self, x, t):
        if self.forcing is None:
            return np.zeros(x.shape[:-1])
        return np.asarray(self.forcing(x, t), dtype=float)


def perturbed_sphere_forcing(x, t):
    return np.sin(np.pi * t) * x[..., 0] ** 2 + np.sin(2.0 * np.pi * t) * x[..., 1] ** 2


def perturbed_sphere_spec(alpha=1e-3):
    return NormalVelocitySpec(alpha=alpha, forcing=perturbed_sphere_forcing)


@dataclass
class EvolutionState:
    mesh: object
    H: DiscreteField
    t: float = 0.0


class MoveResult(NamedTuple):
    Y: DiscreteField
    H: DiscreteField
    mesh: object
    iterations: int
    residual: float
    correction: float


def init_curvature(mesh, k=None, degree=None):
    """Discrete mean curvature H in V_k from (H nu, Z) = -(Grad_C X, Grad_C Z).

    Testing with Z = phi_i nu_h gives (H, phi_i) = (tr B_h, phi_i), since
    Grad_C X_h = P_h and Grad_C(phi nu) = nu (x) grad phi - phi B_h.
    """
    space = ScalarSpace(mesh, mesh.order if k is None else k)
    geo = element_geometry(mesh, degree)
    rhs = assemble_load(space, geo.H, degree)
    vals = DirectSolver(SparseSystem(mass_matrix(space, degree), rhs)).solve()
    return DiscreteField(space, vals)


def _mean_ratio(values, H, geo):
    num = geo.integrate(values * H)
    den = geo.integrate(H)
    return num, den


def area_conserving_velocity(V0, H, degree=None):
    """V = V0 - int V0 H / int H (nodal shift) so that int V H = 0."""
    mesh = V0.space.mesh
    geo = element_geometry(mesh, degree)
    Hq = field_values(H, geo)
    num, den = _mean_ratio(field_values(V0, geo), Hq, geo)
    area = float(geo.dA.sum())
    if abs(den) <= 1e-12 * area / mesh_size(mesh):
        raise ZeroMeanCurvature(f"integral of H is {den:.3e}")
    V = V0.values - num / den
    return DiscreteField(V0.space, V)


def normal_coupling(space, geo):
    """N[i, 3j+c] = (phi_i, phi_j nu_c)."""
    phi, _ = geo.basis(space.order)
    local = np.einsum("eq,qi,qj,eqc->eijc", geo.dA, phi, phi, geo.nu)
    local = local.reshape(geo.n_elements, phi.shape[1], -1)
    return scatter_matrix(local, space.l2g, space.l2g_vector(), (space.dof_count, 3 * space.dof_count))


class MoveOperator:
    """Factorized mesh-movement system on one fixed surface."""

    def __init__(self, mesh, tau, alpha, degree=None):
        self.mesh = mesh
        self.degree = degree
        self.space = ScalarSpace(mesh, mesh.order)
        self.geo = element_geometry(mesh, degree)
        n = self.space.dof_count
        M = mass_matrix(self.space, degree)
        K3 = vectorize(stiffness_matrix(self.space, degree))
        N = normal_coupling(self.space, self.geo)
        A = sp.bmat([[K3, N.T], [N, -tau * alpha * M]], format="csr")
        self.rhs_Z = -(K3 @ mesh.nodes.reshape(-1))
        self.ones = mean_vector(self.space, degree)
        self.n = n
        self.solver = DirectSolver(SparseSystem(A, np.zeros(4 * n)))

    def solve(self, normal_target, correction):
        """Solve with (Y . nu, w) = (normal_target - correction, w) - alpha part."""
        rhs = np.concatenate([self.rhs_Z, normal_target - correction * self.ones])
        x = self.solver.solve(rhs)
        n = self.n
        Y = DiscreteField(self.space, x[: 3 * n].reshape(n, 3))
        H = DiscreteField(self.space, x[3 * n:])
        return Y, H

    def linearized_area_change(self, Y, H):
        """int (Y . nu) H / int H on the current surface."""
        geo = self.geo
        Yn = np.einsum("eqc,eqc->eq", field_values(Y, geo), geo.nu)
        num, den = _mean_ratio(Yn, field_values(H, geo), geo)
        return num / den


def _fixed_point(op, normal_target, H0, eps, max_iter):
    area = float(op.geo.dA.sum())
    tol = eps * np.sqrt(area)
    Y = DiscreteField.zeros(op.space, 3)
    H = H0
    c = 0.0
    residual = 0.0
    for j in range(max_iter + 1):
        residual = op.linearized_area_change(Y, H)
        if j > 0 and abs(residual) < tol:
            return Y, H, j, residual, c
        if j == max_iter:
            break
        # accumulated correction: c^{j+1} = c^j + int Y^j.nu H^j / int H^j
        c += residual
        Y, H = op.solve(normal_target, c)
    raise NoConvergence(max_iter, residual)


def _exact_area_iteration(op, normal_target, Y, H, c, target_area, eps, max_iter, degree):
    # first variation: dA = -int H (Y . nu); the shift c lowers Y . nu by c
    tol = eps * target_area
    gap = np.inf
    for j in range(max_iter + 1):
        new_area = displace(op.mesh, Y, check=False).area(degree)
        gap = target_area - new_area
        if abs(gap) <= tol:
            return Y, H, j, c
        if j == max_iter:
            break
        c += gap / op.geo.integrate(field_values(H, op.geo))
        Y, H = op.solve(normal_target, c)
    raise NoConvergence(max_iter, abs(gap) / target_area)


def _solve_move(op, normal_target, H0, eps, max_iter, degree, area_mode, target_area):
    Y, H, iters, residual, c = _fixed_point(op, normal_target, H0, eps, max_iter)
    if area_mode == "exact":
        if target_area is None:
            target_area = float(op.geo.dA.sum())
        Y, H, more, c = _exact_area_iteration(
            op, normal_target, Y, H, c, target_area, eps, max_iter, degree
        )
        iters += more
        residual = op.linearized_area_change(Y, H)
    elif area_mode != "linear":
        raise ValueError(f"unknown area_mode {area_mode!r}")
    return Y, H, iters, residual, c


def mesh_move_step(state, spec, tau, eps=1e-10, max_iter=50, degree=None,
                   area_mode="linear", target_area=None):
    """Advance the surface by one area-conserving, regularized step.

    ``area_mode="linear"`` stops once the linearised area change
    int (Y . nu) H / int H is below ``eps * sqrt(area)``.  ``"exact"``
    continues shifting the normal speed until the area of the displaced
    surface matches ``target_area`` (default: current area) to relative
    ``eps``.  The returned ``H`` lives on the new mesh (same coefficients,
    reference-chart identification).
    """
    if tau <= 0 or eps <= 0:
        raise ValueError("tau and eps must be positive")
    mesh = state.mesh
    op = MoveOperator(mesh, tau, spec.alpha, degree)
    fq = spec.f(op.geo.x, state.t)
    normal_target = tau * assemble_load(op.space, fq, degree)
    H0 = state.H if state.H is not None else init_curvature(mesh, degree=degree)
    Y, H, iters, residual, c = _solve_move(
        op, normal_target, H0, eps, max_iter, degree, area_mode, target_area
    )
    new_mesh = displace(mesh, Y)
    logger.debug("move step t=%.4f: %d iterations, residual %.2e", state.t, iters, residual)
    return MoveResult(Y, H.on(new_mesh), new_mesh, iters, residual, c)


def advance(state, spec, tau, eps=1e-10, max_iter=50, degree=None, area_mode="linear",
            target_area=None):
    """mesh_move_step plus the new EvolutionState."""
    res = mesh_move_step(state, spec, tau, eps, max_iter, degree, area_mode, target_area)
    return res, EvolutionState(res.mesh, res.H, state.t + tau)


def area_change_step(mesh, D, H0=None, eps=1e-10, max_iter=50, degree=None,
                     area_mode="exact", target_area=None):
    """Area-corrected, regularized replacement of a raw displacement ``D``.

    The normal part of ``D`` is the normal target; the scalar shift is
    iterated as in ``mesh_move_step`` and the tangential part comes from
    the regularization equation.
    """
    op = MoveOperator(mesh, 1.0, 0.0, degree)
    Dq = field_values(D, op.geo)
    normal_target = assemble_load(op.space, np.einsum("eqc,eqc->eq", Dq, op.geo.nu), degree)
    H0 = H0 if H0 is not None else init_curvature(mesh, degree=degree)
    Y, H, iters, _, _ = _solve_move(
        op, normal_target, H0, eps, max_iter, degree, area_mode, target_area
    )
    return Y, H, iters


def preprocess_sequence(meshes, eps=1e-10, max_iter=50, degree=None, conserve="exact"):
    """Replace consecutive frame displacements by area-corrected, regularized ones.

    ``conserve="exact"`` drives the area of every corrected frame to that
    of the first frame; ``"linear"`` only removes the linearised area
    change as in ``mesh_move_step``.
    """
    meshes = list(meshes)
    if not meshes:
        return []
    ref = meshes[0].ref
    for m in meshes[1:]:
        if not ref.same_connectivity(m.ref) or m.order != meshes[0].order:
            raise ConnectivityMismatch("frames do not share connectivity and order")
    target = meshes[0].area(degree)
    out = [meshes[0]]
    H = None
    space = ScalarSpace(meshes[0], meshes[0].order)
    for raw_prev, raw_next in zip(meshes[:-1], meshes[1:]):
        cur = out[-1]
        D = DiscreteField(space.on(cur), raw_next.nodes - raw_prev.nodes)
        Y, H, iters = area_change_step(cur, D, H, eps, max_iter, degree, conserve, target)
        new = displace(cur, Y)
        H = H.on(new)
        out.append(new)
        logger.debug("frame %d corrected in %d iterations", len(out) - 1, iters)
    return out
