"""Continuous Lagrange spaces on curved meshes, assembly and direct solves."""
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import lagrange
from .errors import DimensionMismatch, NonFiniteSolution, SingularMatrix
from .geometry import ElementGeometry, element_geometry, field_values


class ScalarSpace:
    """Degree-``order`` continuous Lagrange space V_m(S_h) on ``mesh``.

    Vector-valued fields use the same numbering with three interleaved
    components per node (coefficient index ``3 * node + component``).
    """

    def __init__(self, mesh, order):
        if order < 1:
            raise ValueError("space order must be >= 1")
        self.mesh = mesh
        self.order = int(order)
        self.l2g = mesh.ref.dof_map(self.order)
        self.dof_count = mesh.ref.dof_count(self.order)

    @property
    def n_local(self):
        return lagrange.n_local(self.order)

    def l2g_vector(self):
        return (3 * self.l2g[:, :, None] + np.arange(3)).reshape(len(self.l2g), -1)

    def node_positions(self):
        """Positions of the Lagrange nodes on the curved surface."""
        if self.order == self.mesh.order:
            return self.mesh.nodes
        key = ("nodes", self.order)
        if key not in self.mesh._cache:
            geo = ElementGeometry(self.mesh, lagrange.reference_nodes(self.order))
            out = np.empty((self.dof_count, 3))
            out[self.l2g.ravel()] = geo.x.reshape(-1, 3)
            self.mesh._cache[key] = out
        return self.mesh._cache[key]

    def on(self, mesh):
        """Same numbering over another geometry of the same triangulation."""
        return ScalarSpace(mesh, self.order)

    def __repr__(self):
        return f"ScalarSpace(order={self.order}, dofs={self.dof_count})"


def build_space(mesh, k):
    return ScalarSpace(mesh, k)


class DiscreteField:
    """Coefficients of a scalar (shape (n,)) or 3-vector (shape (n, 3)) field."""

    def __init__(self, space, values):
        values = np.asarray(values, dtype=float)
        if values.shape not in ((space.dof_count,), (space.dof_count, 3)):
            if values.size == 3 * space.dof_count:
                values = values.reshape(space.dof_count, 3)
            else:
                raise DimensionMismatch(
                    f"field of shape {values.shape} on space with {space.dof_count} dofs"
                )
        self.space = space
        self.values = values

    @property
    def components(self):
        return 1 if self.values.ndim == 1 else 3

    @property
    def coefficients(self):
        return self.values.reshape(-1)

    @property
    def mesh(self):
        return self.space.mesh

    def copy(self):
        return DiscreteField(self.space, self.values.copy())

    def on(self, mesh):
        """Same coefficients re-read over ``mesh`` (shared reference chart)."""
        return DiscreteField(self.space.on(mesh), self.values.copy())

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))

    @classmethod
    def zeros(cls, space, components=1):
        shape = (space.dof_count,) if components == 1 else (space.dof_count, 3)
        return cls(space, np.zeros(shape))


def interpolate(space, func, components=None):
    """Nodal interpolant of ``func(x)`` with x of shape (n, 3)."""
    x = space.node_positions()
    vals = np.asarray(func(x), dtype=float)
    if vals.ndim == 0:
        vals = np.full(len(x), float(vals))
    if components == 3 and vals.ndim == 1:
        vals = np.broadcast_to(vals, (3, len(x))).T.copy()
    return DiscreteField(space, vals)


# --- assembly --------------------------------------------------------------

def _vector_l2g(space, components):
    return space.l2g if components == 1 else space.l2g_vector()


def scatter_matrix(local, rows_l2g, cols_l2g, shape):
    """Sum element blocks (E, nr, nc) into a CSR matrix."""
    E, nr, nc = local.shape
    if rows_l2g.shape != (E, nr) or cols_l2g.shape != (E, nc):
        raise DimensionMismatch(
            f"local block {local.shape} does not match maps {rows_l2g.shape}, {cols_l2g.shape}"
        )
    r = np.broadcast_to(rows_l2g[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols_l2g[:, None, :], local.shape).ravel()
    A = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
    A.sum_duplicates()
    return A


def scatter_vector(local, l2g, size):
    if local.shape != l2g.shape:
        raise DimensionMismatch(f"local vector {local.shape} vs map {l2g.shape}")
    return np.bincount(l2g.ravel(), weights=local.ravel(), minlength=size)


def assemble(test_space, trial_space, form, degree=None, test_components=1, trial_components=1):
    """Assemble a bilinear form.

    ``form(geo, test, trial)`` receives the element geometry and the
    ``(phi, G)`` basis tuples of both spaces and returns local matrices of
    shape (E, n_test * c_test, n_trial * c_trial).
    """
    geo = element_geometry(test_space.mesh, degree)
    local = form(geo, geo.basis(test_space.order), geo.basis(trial_space.order))
    shape = (test_space.dof_count * test_components, trial_space.dof_count * trial_components)
    return scatter_matrix(
        local,
        _vector_l2g(test_space, test_components),
        _vector_l2g(trial_space, trial_components),
        shape,
    )


def assemble_load(space, values, degree=None, components=1):
    """Load vector (f, phi_i) for f given at quadrature points, (E, Q) or (E, Q, 3)."""
    geo = element_geometry(space.mesh, degree)
    phi, _ = geo.basis(space.order)
    if components == 1:
        local = np.einsum("eq,qi,eq->ei", geo.dA, phi, values)
    else:
        local = np.einsum("eq,qi,eqc->eic", geo.dA, phi, values).reshape(geo.n_elements, -1)
    n = space.dof_count * components
    return scatter_vector(local, _vector_l2g(space, components), n)


def mass_form(geo, test, trial):
    return np.einsum("eq,qi,qj->eij", geo.dA, test[0], trial[0])


def stiffness_form(geo, test, trial):
    return np.einsum("eq,eqik,eqjk->eij", geo.dA, test[1], trial[1])


def mass_matrix(space, degree=None):
    key = ("mass", space.order, degree)
    cache = space.mesh._cache
    if key not in cache:
        cache[key] = assemble(space, space, mass_form, degree)
    return cache[key]


def stiffness_matrix(space, degree=None):
    key = ("stiff", space.order, degree)
    cache = space.mesh._cache
    if key not in cache:
        cache[key] = assemble(space, space, stiffness_form, degree)
    return cache[key]


def vectorize(A):
    """Scalar operator to the interleaved 3-component operator (A kron I3)."""
    return sp.kron(A, sp.identity(3), format="csr")


def mean_vector(space, degree=None):
    """(1, phi_i): integrates a field given its coefficients."""
    geo = element_geometry(space.mesh, degree)
    phi, _ = geo.basis(space.order)
    return scatter_vector(np.einsum("eq,qi->ei", geo.dA, phi), space.l2g, space.dof_count)


# --- linear systems --------------------------------------------------------

@dataclass
class SparseSystem:
    """Square sparse system, optionally augmented by one constraint row/column.

    With ``constraint = c`` (length n) the solved system is
    [[A, c], [c^T, 0]] [x; lam] = [b; constraint_rhs].
    """

    matrix: sp.spmatrix
    rhs: np.ndarray
    constraint: np.ndarray = None
    constraint_rhs: float = 0.0
    info: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        n, m = self.matrix.shape
        if n != m or len(self.rhs) != n:
            raise DimensionMismatch(f"matrix {self.matrix.shape} with rhs {len(self.rhs)}")
        if self.constraint is not None and len(self.constraint) != n:
            raise DimensionMismatch("constraint length does not match matrix")

    @property
    def size(self):
        return self.matrix.shape[0]

    def full_matrix(self):
        A = sp.csr_matrix(self.matrix)
        if self.constraint is None:
            return A
        c = sp.csr_matrix(np.asarray(self.constraint).reshape(-1, 1))
        return sp.bmat([[A, c], [c.T, None]], format="csr")

    def full_rhs(self, rhs=None):
        b = self.rhs if rhs is None else rhs
        if self.constraint is None:
            return np.asarray(b, dtype=float)
        return np.append(b, self.constraint_rhs)


PIVOT_THRESHOLD = 1e-14
BACKWARD_TOL = 1e-8

# symmetric-structure ordering with static diagonal pivots (zero diagonals
# still pivot), then threshold pivoting, then plain partial pivoting.  Any
# threshold > 0 tends to leave the ordering on these saddle systems and
# multiplies the fill by ~10, so it is only a fallback.
_LU_STRATEGIES = (
    dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True)),
    dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.01, options=dict(SymmetricMode=True)),
    dict(permc_spec="COLAMD"),
)


def _backward_error(lu, A):
    """Relative residual of a solve with known solution (all ones)."""
    x = np.ones(A.shape[0])
    b = A @ x
    r = b - A @ lu.solve(b)
    return float(np.linalg.norm(r) / max(np.linalg.norm(b), 1e-300))


def _pivot_ratio(lu):
    piv = np.abs(lu.U.diagonal())
    if not piv.size:
        return 1.0
    if not np.all(np.isfinite(piv)):
        return 0.0
    return piv.min() / max(piv.max(), 1e-300)


class DirectSolver:
    """Sparse LU factorization (SuperLU) reusable across right-hand sides."""

    def __init__(self, system):
        self.system = system
        A = system.full_matrix().tocsc()
        A.sort_indices()
        self.A = A
        self.lu = None
        message = ""
        for opts in _LU_STRATEGIES:
            try:
                lu = spla.splu(A, **opts)
            except RuntimeError as exc:
                message = str(exc)
                continue
            ratio = _pivot_ratio(lu)
            if ratio <= PIVOT_THRESHOLD:
                message = f"pivot ratio {ratio:.2e} below {PIVOT_THRESHOLD:g}"
                continue
            berr = _backward_error(lu, A)
            if not berr <= BACKWARD_TOL:
                message = f"backward error {berr:.2e} above {BACKWARD_TOL:g}"
                continue
            self.lu = lu
            break
        if self.lu is None:
            raise SingularMatrix(message)
        self.residual = None

    def solve(self, rhs=None, full=False):
        b = self.system.full_rhs(rhs)
        x = self.lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise NonFiniteSolution("direct solve produced non-finite values")
        normA = spla.norm(self.A, np.inf)
        for _ in range(2):
            r = b - self.A @ x
            bound = 1e-9 * (normA * np.linalg.norm(x) + np.linalg.norm(b))
            if np.linalg.norm(r) <= bound:
                break
            x = x + self.lu.solve(r)
        self.residual = float(np.linalg.norm(b - self.A @ x))
        n = self.system.size
        return x if full else x[:n]


def solve_direct(system):
    """Solve ``system`` by sparse LU; returns the primary unknowns."""
    return DirectSolver(system).solve()


# --- norms -----------------------------------------------------------------

def l2_norm(field, degree=None):
    geo = element_geometry(field.space.mesh, degree)
    v = field_values(field, geo)
    sq = v**2 if field.components == 1 else np.sum(v**2, axis=-1)
    return float(np.sqrt(np.sum(geo.dA * sq)))


def integral(field, degree=None):
    geo = element_geometry(field.space.mesh, degree)
    return geo.integrate(field_values(field, geo))


class LinfTracker:
    """Running maximum of a per-step quantity (L-infinity in time)."""

    def __init__(self):
        self.value = 0.0
        self.count = 0

    def update(self, value):
        self.value = max(self.value, float(value))
        self.count += 1
        return self


def linf_track(accumulator, value):
    return (accumulator or LinfTracker()).update(value)
