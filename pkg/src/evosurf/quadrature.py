"""Symmetric quadrature rules on the reference triangle (0,0), (1,0), (0,1).

Low degrees use fully symmetric tabulated rules (centroid, Strang-Fix,
Radon, Dunavant).  Degrees without a table here are served by a
collapsed Gauss-Jacobi product rule averaged over the six barycentric
permutations, which keeps all weights positive and the point set
symmetric at the price of more points.
"""
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import UnsupportedDegree

MAX_DEGREE = 12

_SQ15 = np.sqrt(15.0)

# (degree, [(orbit, parameters, weight)]) with weights normalised to sum 1.
# orbit "3": centroid, "21": (a, a, 1-2a), "111": (a, b, 1-a-b).
_TABLES = {
    1: [("3", (), 1.0)],
    2: [("21", (1.0 / 6.0,), 1.0 / 3.0)],
    4: [
        ("21", (0.445948490915965,), 0.223381589678011),
        ("21", (0.091576213509771,), 0.109951743655322),
    ],
    5: [
        ("3", (), 9.0 / 40.0),
        ("21", ((6.0 - _SQ15) / 21.0,), (155.0 - _SQ15) / 1200.0),
        ("21", ((6.0 + _SQ15) / 21.0,), (155.0 + _SQ15) / 1200.0),
    ],
    8: [
        ("3", (), 0.144315607677787),
        ("21", (0.459292588292723,), 0.095091634267285),
        ("21", (0.170569307751760,), 0.103217370534718),
        ("21", (0.050547228317031,), 0.032458497623198),
        ("111", (0.263112829634638, 0.008394777409958), 0.027230314174435),
    ],
}
# tabulated rule used for each requested degree
_TABLE_FOR = {1: 1, 2: 2, 3: 4, 4: 4, 5: 5, 6: 8, 7: 8, 8: 8}


@dataclass(frozen=True)
class QuadratureRule:
    """Points in reference coordinates (xi, eta) with weights summing to 1/2."""

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def barycentric(self):
        xi, eta = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - xi - eta, xi, eta])

    def __len__(self):
        return len(self.weights)


def _expand(table):
    bary, w = [], []
    for orbit, params, weight in table:
        if orbit == "3":
            pts = [(1 / 3, 1 / 3, 1 / 3)]
        elif orbit == "21":
            a = params[0]
            pts = [(a, a, 1 - 2 * a), (a, 1 - 2 * a, a), (1 - 2 * a, a, a)]
        else:
            a, b = params
            pts = sorted(set(permutations((a, b, 1 - a - b))))
        bary.extend(pts)
        w.extend([weight] * len(pts))
    return np.asarray(bary), np.asarray(w)


def _polish(bary, w, degree):
    # one least-squares correction of the tabulated weights so that all
    # monomials up to ``degree`` are hit to round-off
    xi, eta = bary[:, 1], bary[:, 2]
    rows, rhs = [], []
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            rows.append(xi**p * eta**q)
            rhs.append(monomial_integral(p, q) * 2.0)
    A = np.array(rows)
    dw, *_ = np.linalg.lstsq(A, np.array(rhs) - A @ w, rcond=None)
    return w + dw


def _collapsed(degree):
    n = (degree + 2) // 2
    u, wu = roots_legendre(n)
    u, wu = 0.5 * (u + 1.0), 0.5 * wu
    v, wv = roots_jacobi(n, 1.0, 0.0)
    v, wv = 0.5 * (v + 1.0), 0.25 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv).ravel()
    xi = (U * (1.0 - V)).ravel()
    eta = V.ravel()
    base = np.column_stack([1.0 - xi - eta, xi, eta])
    bary = np.concatenate([base[:, list(p)] for p in permutations(range(3))])
    w = np.tile(W, 6) / 6.0 * 2.0
    return bary, w


def monomial_integral(p, q):
    """Exact integral of xi**p * eta**q over the reference triangle."""
    from math import factorial

    return factorial(p) * factorial(q) / factorial(p + q + 2)


@lru_cache(maxsize=None)
def quadrature_rule(degree):
    """Return a symmetric, positive rule exact for polynomials of total ``degree``."""
    degree = int(degree)
    if not 1 <= degree <= MAX_DEGREE:
        raise UnsupportedDegree(f"quadrature degree {degree} not in [1, {MAX_DEGREE}]")
    if degree in _TABLE_FOR:
        exact = _TABLE_FOR[degree]
        bary, w = _expand(_TABLES[exact])
        w = _polish(bary, w, exact)
    else:
        exact = 2 * ((degree + 2) // 2) - 1
        bary, w = _collapsed(degree)
    pts = np.ascontiguousarray(bary[:, 1:])
    pts.setflags(write=False)
    w = 0.5 * w / w.sum() if degree in _TABLE_FOR else 0.5 * w
    w.setflags(write=False)
    return QuadratureRule(pts, w, exact)
