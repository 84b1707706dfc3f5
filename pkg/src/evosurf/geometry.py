"""Geometric frames and surface differential operators on curved elements.

Everything is evaluated in batches over (element, point) pairs.  For the
element map X(xi) with Jacobian J (3x2) and metric g = J^T J:

    nu = J_0 x J_1 / |J_0 x J_1|,   P = I - nu nu^T,
    surface gradient of a scalar:  J g^{-1} grad_xi f,
    B = J g^{-1} II g^{-1} J^T  with  II_ab = d_a d_b X . nu,   H = tr B.

This is the Weingarten map B = -Grad_C nu written in the reference chart;
the outward unit sphere gets B = -P and H = -2.
"""
from dataclasses import dataclass

import numpy as np

from . import lagrange
from .errors import DegenerateJacobian
from .quadrature import quadrature_rule


def default_degree(order):
    return min(2 * order + 2, 12)


@dataclass(frozen=True)
class GeometryFrame:
    """Geometric data at one point of one curved element."""

    x: np.ndarray
    J: np.ndarray
    sqrt_det_g: float
    nu: np.ndarray
    P: np.ndarray
    B: np.ndarray
    H: float


class ElementGeometry:
    """Frames of all elements at a common set of reference points.

    Arrays are indexed ``[element, point, ...]``.  ``dA`` holds quadrature
    weight times area element when built from a rule, else zeros.
    """

    def __init__(self, mesh, points, weights=None):
        self.mesh = mesh
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        k = mesh.order
        phi = lagrange.eval_basis(k, self.points)
        dphi = lagrange.eval_gradients(k, self.points)
        d2phi = lagrange.eval_hessians(k, self.points)
        X = mesh.geom_nodes
        self.phi = phi
        self.x = np.einsum("qn,enc->eqc", phi, X)
        J = np.einsum("qna,enc->eqca", dphi, X)
        D2 = np.einsum("qns,enc->eqsc", d2phi, X)
        self.J = J
        cr = np.cross(J[..., 0], J[..., 1])
        self.normal_raw = cr
        s = np.linalg.norm(cr, axis=-1)
        self.sqrt_det_g = s
        if np.any(~np.isfinite(s)) or np.any(s <= 0.0):
            bad = np.flatnonzero(np.any(~(s > 0.0), axis=1))
            raise DegenerateJacobian(f"zero area element, first index {bad[0]}")
        nu = cr / s[..., None]
        self.nu = nu
        g = np.einsum("eqca,eqcb->eqab", J, J)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        ginv = np.empty_like(g)
        ginv[..., 0, 0] = g[..., 1, 1] / det
        ginv[..., 1, 1] = g[..., 0, 0] / det
        ginv[..., 0, 1] = -g[..., 0, 1] / det
        ginv[..., 1, 0] = -g[..., 1, 0] / det
        self.ginv = ginv
        # J g^{-1}: pushes reference gradients to surface gradients
        self.Jg = np.einsum("eqca,eqab->eqcb", J, ginv)
        self.P = np.eye(3) - nu[..., :, None] * nu[..., None, :]
        II = np.einsum("eqsc,eqc->eqs", D2, nu)
        IIm = np.stack(
            [np.stack([II[..., 0], II[..., 1]], -1), np.stack([II[..., 1], II[..., 2]], -1)],
            -2,
        )
        B = np.einsum("eqca,eqab,eqdb->eqcd", self.Jg, IIm, self.Jg)
        B = np.einsum("eqab,eqbc,eqcd->eqad", self.P, B, self.P)
        self.B = 0.5 * (B + np.swapaxes(B, -1, -2))
        self.H = np.trace(self.B, axis1=-2, axis2=-1)
        self.G = self.surface_gradients(dphi)
        if weights is None:
            self.weights = None
            self.dA = np.zeros_like(s)
        else:
            self.weights = np.asarray(weights, dtype=float)
            self.dA = s * self.weights[None, :]
        self._bases = {k: (phi, self.G)}

    @property
    def n_elements(self):
        return self.x.shape[0]

    @property
    def n_points(self):
        return self.x.shape[1]

    def surface_gradients(self, dphi):
        """(E, Q, n, 3) surface gradients from reference gradients (Q, n, 2)."""
        return np.einsum("eqcb,qnb->eqnc", self.Jg, dphi)

    def basis(self, m):
        """Values (Q, n_m) and surface gradients (E, Q, n_m, 3) of the degree-m basis."""
        if m not in self._bases:
            phi = lagrange.eval_basis(m, self.points)
            if m == 0:
                G = np.zeros(self.x.shape[:2] + (1, 3))
            else:
                G = self.surface_gradients(lagrange.eval_gradients(m, self.points))
            self._bases[m] = (phi, G)
        return self._bases[m]

    def frame(self, elem, point=0):
        return GeometryFrame(
            x=self.x[elem, point].copy(),
            J=self.J[elem, point].copy(),
            sqrt_det_g=float(self.sqrt_det_g[elem, point]),
            nu=self.nu[elem, point].copy(),
            P=self.P[elem, point].copy(),
            B=self.B[elem, point].copy(),
            H=float(self.H[elem, point]),
        )

    def integrate(self, values):
        """Sum of dA * values over all elements and points; values shaped (E, Q)."""
        return float(np.sum(self.dA * values))


def element_geometry(mesh, degree=None):
    """Cached quadrature-point geometry of ``mesh`` for rule ``degree``."""
    degree = default_degree(mesh.order) if degree is None else int(degree)
    key = ("geom", degree)
    cache = mesh._cache
    if key not in cache:
        rule = quadrature_rule(degree)
        cache[key] = ElementGeometry(mesh, rule.points, rule.weights)
    return cache[key]


def frame_at(mesh, elem, ref_pt):
    """GeometryFrame of element ``elem`` at reference coordinate ``ref_pt``."""
    ref_pt = np.asarray(ref_pt, dtype=float).reshape(1, 2)
    if ref_pt.min() < -1e-12 or ref_pt.sum() > 1 + 1e-12:
        raise ValueError("reference point outside the reference triangle")
    sub = _SingleElement(mesh, elem)
    return ElementGeometry(sub, ref_pt).frame(0, 0)


class _SingleElement:
    """Minimal mesh view exposing one element to ElementGeometry."""

    def __init__(self, mesh, elem):
        self.order = mesh.order
        self.geom_nodes = mesh.geom_nodes[elem:elem + 1]


def integrate(mesh, integrand, degree=None):
    """Integrate ``integrand(geometry) -> (E, Q)`` array (or scalar) over the surface."""
    geo = element_geometry(mesh, degree)
    vals = integrand(geo) if callable(integrand) else integrand
    return float(np.sum(geo.dA * np.broadcast_to(vals, geo.dA.shape)))


# --- pointwise differential operators of discrete fields ---------------------

def field_values(field, geo):
    """Values at all (element, point) pairs: (E, Q) or (E, Q, 3)."""
    phi, _ = geo.basis(field.space.order)
    c = field.values[field.space.l2g]
    if field.components == 1:
        return np.einsum("qn,en->eq", phi, c)
    return np.einsum("qn,enc->eqc", phi, c)


def field_grad_C(field, geo):
    """Componentwise surface gradient at all points.

    Scalar fields give (E, Q, 3); vector fields give (E, Q, 3, 3) with
    rows indexing components, i.e. (nabla u^e) P.
    """
    _, G = geo.basis(field.space.order)
    c = field.values[field.space.l2g]
    if field.components == 1:
        return np.einsum("eqnk,en->eqk", G, c)
    return np.einsum("eqnk,enc->eqck", G, c)


def field_grad_P(field, geo):
    return np.einsum("eqab,eqbc->eqac", geo.P, field_grad_C(field, geo))


def field_div_P(field, geo):
    return np.trace(field_grad_C(field, geo), axis1=-2, axis2=-1)


def _point(field, elem, ref_pt):
    mesh = field.space.mesh
    sub = _SingleElement(mesh, elem)
    geo = ElementGeometry(sub, np.asarray(ref_pt, dtype=float).reshape(1, 2))
    return geo, np.array([elem])


def eval_grad_C(field, elem, ref_pt):
    """Grad_C of ``field`` at one point: 3-vector (scalar field) or 3x3."""
    geo, idx = _point(field, elem, ref_pt)
    _, G = geo.basis(field.space.order)
    c = field.values[field.space.l2g[idx]]
    if field.components == 1:
        return np.einsum("eqnk,en->eqk", G, c)[0, 0]
    return np.einsum("eqnk,enc->eqck", G, c)[0, 0]


def eval_grad_P(field, elem, ref_pt):
    """P (nabla u^e) P of a vector field at one point."""
    P = frame_at(field.space.mesh, elem, ref_pt).P
    return P @ eval_grad_C(field, elem, ref_pt)


def div_P(field, elem, ref_pt):
    return float(np.trace(eval_grad_P(field, elem, ref_pt)))


def div_C(tensor, dtensor, frame):
    """Row-wise divergence tr Grad_C of a tensor field at one point.

    ``dtensor`` is the ambient derivative d sigma_ij / d x_k (3x3x3) of an
    extension; the result is sum_jk dtensor[i, j, k] P[k, j].
    """
    return np.einsum("ijk,kj->i", np.asarray(dtensor), frame.P)
