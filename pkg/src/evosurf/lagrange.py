"""Lagrange basis of degree m on the reference triangle.

Local node order: the three vertices (0,0), (1,0), (0,1); then the
m-1 interior nodes of each local edge v0->v1, v1->v2, v2->v0 in that
direction; then interior nodes in lexicographic order of (xi, eta).
"""
from functools import lru_cache

import numpy as np

LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def n_local(m):
    return (m + 1) * (m + 2) // 2


def n_interior(m):
    return (m - 1) * (m - 2) // 2 if m >= 3 else 0


@lru_cache(maxsize=None)
def reference_nodes(m):
    """(n_local, 2) array of node coordinates."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = list(verts)
    for a, b in LOCAL_EDGES:
        for t in range(1, m):
            s = t / m
            nodes.append((1.0 - s) * verts[a] + s * verts[b])
    for i in range(1, m):
        for j in range(1, m - i):
            nodes.append(np.array([i / m, j / m]))
    out = np.array(nodes, dtype=float)
    out.setflags(write=False)
    return out


def _exponents(m):
    return [(p, q) for p in range(m + 1) for q in range(m + 1 - p)]


@lru_cache(maxsize=None)
def _coefficients(m):
    # columns of the inverse Vandermonde matrix are the monomial
    # coefficients of the nodal basis functions
    nodes = reference_nodes(m)
    V = np.array([[x**p * y**q for p, q in _exponents(m)] for x, y in nodes])
    return np.linalg.inv(V)


def _monomials(m, pts, dx, dy):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    cols = []
    for p, q in _exponents(m):
        if p < dx or q < dy:
            cols.append(np.zeros_like(x))
            continue
        c = 1.0
        for k in range(dx):
            c *= p - k
        for k in range(dy):
            c *= q - k
        cols.append(c * x ** (p - dx) * y ** (q - dy))
    return np.column_stack(cols)


def eval_basis(m, pts):
    """Values, shape (n_pts, n_local)."""
    if m == 0:
        return np.ones((len(np.atleast_2d(pts)), 1))
    return _monomials(m, pts, 0, 0) @ _coefficients(m)


def eval_gradients(m, pts):
    """Reference gradients, shape (n_pts, n_local, 2)."""
    C = _coefficients(m)
    return np.stack([_monomials(m, pts, 1, 0) @ C, _monomials(m, pts, 0, 1) @ C], axis=-1)


def eval_hessians(m, pts):
    """Second derivatives (d_xx, d_xy, d_yy), shape (n_pts, n_local, 3)."""
    C = _coefficients(m)
    return np.stack(
        [_monomials(m, pts, 2, 0) @ C, _monomials(m, pts, 1, 1) @ C, _monomials(m, pts, 0, 2) @ C],
        axis=-1,
    )


@lru_cache(maxsize=None)
def lattice_triangles(m):
    """Split the degree-m node lattice into m**2 linear sub-triangles (local indices)."""
    nodes = reference_nodes(m)
    index = {(int(round(x * m)), int(round(y * m))): n for n, (x, y) in enumerate(nodes)}
    tris = []
    for i in range(m):
        for j in range(m - i):
            tris.append((index[i, j], index[i + 1, j], index[i, j + 1]))
            if i + j < m - 1:
                tris.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
    return np.array(tris, dtype=np.int64)
