"""Closed, oriented triangulated surfaces with order-k Lagrange geometry."""
import logging
from functools import cached_property
from pathlib import Path

import numpy as np

from . import lagrange
from .errors import ConnectivityMismatch, FoldedElement, InvalidMesh, ParseError

logger = logging.getLogger(__name__)


class ReferenceTriangulation:
    """Connectivity of a closed, consistently oriented triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (nv, 3)
        Initial vertex positions.
    triangles : array_like, shape (nt, 3)
        Vertex indices; the winding defines the orientation.
    validate : bool
        Check closedness, orientation and degeneracy.
    """

    def __init__(self, vertices, triangles, validate=True):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        self._dof_maps = {}
        if validate:
            self.validate()

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def _edge_data(self):
        t = self.triangles
        directed = np.stack([t[:, [a, b]] for a, b in lagrange.LOCAL_EDGES], axis=1)
        flat = directed.reshape(-1, 2)
        key = np.sort(flat, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1).reshape(len(t), 3), directed

    @property
    def edges(self):
        """(ne, 2) vertex pairs, each sorted ascending (canonical direction)."""
        return self._edge_data[0]

    @property
    def triangle_edges(self):
        """(nt, 3) edge index of local edges v0v1, v1v2, v2v0."""
        return self._edge_data[1]

    def validate(self):
        t = self.triangles
        if len(t) == 0:
            raise InvalidMesh("empty triangulation")
        if t.min() < 0 or t.max() >= self.n_vertices:
            raise InvalidMesh("triangle index out of range")
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise InvalidMesh("degenerate triangle with repeated vertex")
        edges, tri_edges, directed = self._edge_data
        counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
        if np.any(counts != 2):
            raise InvalidMesh(
                f"{int(np.sum(counts != 2))} edges not shared by exactly two triangles"
            )
        flat = directed.reshape(-1, 2)
        uniq = np.unique(flat, axis=0)
        if len(uniq) != len(flat):
            raise InvalidMesh("inconsistent triangle orientation")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise InvalidMesh("unreferenced vertices")

    def dof_count(self, m):
        return (
            self.n_vertices
            + (m - 1) * self.n_edges
            + lagrange.n_interior(m) * self.n_triangles
        )

    def dof_map(self, m):
        """Local-to-global map of the degree-m Lagrange space, shape (nt, n_local(m))."""
        if m in self._dof_maps:
            return self._dof_maps[m]
        nv, ne, nt = self.n_vertices, self.n_edges, self.n_triangles
        t = self.triangles
        cols = [t[:, 0], t[:, 1], t[:, 2]]
        tri_edges = self.triangle_edges
        for le, (a, b) in enumerate(lagrange.LOCAL_EDGES):
            forward = t[:, a] < t[:, b]
            base = nv + tri_edges[:, le] * (m - 1)
            for s in range(1, m):
                cols.append(np.where(forward, base + s - 1, base + m - s - 1))
        ni = lagrange.n_interior(m)
        start = nv + (m - 1) * ne
        for s in range(ni):
            cols.append(start + np.arange(nt) * ni + s)
        l2g = np.ascontiguousarray(np.column_stack(cols).astype(np.int64))
        l2g.setflags(write=False)
        self._dof_maps[m] = l2g
        return l2g

    def lagrange_points(self, m, vertices=None):
        """Positions of the degree-m Lagrange nodes on the flat triangles.

        Edge nodes are interpolated along the canonical (ascending) edge
        direction, so every node is computed exactly once.
        """
        v = self.vertices if vertices is None else np.asarray(vertices, dtype=float)
        out = np.empty((self.dof_count(m), 3))
        nv = self.n_vertices
        out[:nv] = v
        if m == 1:
            return out
        e = self.edges
        s = np.arange(1, m) / m
        pts = (1.0 - s)[None, :, None] * v[e[:, 0]][:, None, :] + s[None, :, None] * v[e[:, 1]][:, None, :]
        out[nv:nv + (m - 1) * len(e)] = pts.reshape(-1, 3)
        ni = lagrange.n_interior(m)
        if ni:
            ref = lagrange.reference_nodes(m)[-ni:]
            bary = np.column_stack([1.0 - ref.sum(axis=1), ref])
            tv = v[self.triangles]
            pts = np.einsum("sk,tkc->tsc", bary, tv)
            out[nv + (m - 1) * len(e):] = pts.reshape(-1, 3)
        return out

    def same_connectivity(self, other):
        return (
            self.n_vertices == other.n_vertices
            and self.triangles.shape == other.triangles.shape
            and np.array_equal(self.triangles, other.triangles)
        )


class CurvedMesh:
    """Order-k isoparametric surface: global Lagrange geometry nodes over a triangulation.

    Geometry nodes are stored once per global node, so coincident nodes of
    neighbouring elements are bit-identical by construction.  Instances are
    treated as immutable.
    """

    def __init__(self, ref, order, nodes, check=True):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.ref = ref
        self.order = int(order)
        nodes = np.array(nodes, dtype=float).reshape(-1, 3)
        if len(nodes) != ref.dof_count(order):
            raise InvalidMesh(
                f"expected {ref.dof_count(order)} geometry nodes, got {len(nodes)}"
            )
        nodes.setflags(write=False)
        self.nodes = nodes
        self._cache = {}
        if check:
            self.check_geometry()

    @property
    def n_elements(self):
        return self.ref.n_triangles

    @property
    def l2g(self):
        return self.ref.dof_map(self.order)

    @property
    def geom_nodes(self):
        """(nt, n_local, 3) element-wise copy of the geometry nodes."""
        return self.nodes[self.l2g]

    @property
    def vertices(self):
        return self.nodes[: self.ref.n_vertices]

    def check_geometry(self, degree=None):
        """Raise FoldedElement if any element map degenerates or flips orientation."""
        from .geometry import element_geometry

        g = element_geometry(self, degree)
        v = self.vertices
        t = self.ref.triangles
        flat = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        scale = mesh_size(self) ** 2
        small = g.sqrt_det_g <= 1e-12 * scale
        flipped = np.einsum("eqc,ec->eq", g.normal_raw, flat) <= 0.0
        bad = np.flatnonzero(np.any(small | flipped, axis=1))
        if len(bad):
            raise FoldedElement(
                f"{len(bad)} element(s) folded or degenerate, first index {bad[0]}"
            )

    def with_nodes(self, nodes, check=True):
        return CurvedMesh(self.ref, self.order, nodes, check=check)

    def area(self, degree=None):
        from .geometry import element_geometry

        return float(element_geometry(self, degree).dA.sum())


def _icosahedron():
    p = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(v, f):
    verts = list(v)
    cache = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            m = 0.5 * (verts[a] + verts[b])
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    faces = []
    for a, b, c in f:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), np.array(faces, dtype=np.int64)


def make_icosphere(refinement_level, order, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Unit icosahedron refined ``refinement_level`` times, all nodes projected radially."""
    if refinement_level < 0 or order < 1:
        raise ValueError("need refinement_level >= 0 and order >= 1")
    v, f = _icosahedron()
    for _ in range(refinement_level):
        v, f = _subdivide(v, f)
    ref = ReferenceTriangulation(v, f)
    pts = ref.lagrange_points(order)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return CurvedMesh(ref, order, radius * pts + np.asarray(center, dtype=float))


def mesh_size(mesh):
    """Longest edge of the vertex skeleton."""
    v = mesh.vertices
    e = mesh.ref.edges
    return float(np.linalg.norm(v[e[:, 1]] - v[e[:, 0]], axis=1).max())


def displace(mesh, Y, check=True):
    """New mesh with geometry nodes shifted by the nodal values of vector field ``Y``."""
    coeffs = getattr(Y, "values", Y)
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1, 3)
    if coeffs.shape != mesh.nodes.shape:
        raise ConnectivityMismatch(
            f"displacement has {len(coeffs)} nodes, mesh has {len(mesh.nodes)}"
        )
    return mesh.with_nodes(mesh.nodes + coeffs, check=check)


def linear_to_order(ref, vertices, order):
    """Order-k mesh whose elements are the flat triangles through ``vertices``."""
    return CurvedMesh(ref, order, ref.lagrange_points(order, vertices))


# --- file formats -----------------------------------------------------------

def _tokens(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def read_off(path):
    """Read an ASCII OFF triangle mesh; returns (vertices, triangles)."""
    it = _tokens(path)
    try:
        lineno, tok = next(it)
    except StopIteration:
        raise ParseError(path, 1, "empty file") from None
    if tok[0] != "OFF":
        raise ParseError(path, lineno, "missing OFF header")
    tok = tok[1:]
    if not tok:
        try:
            lineno, tok = next(it)
        except StopIteration:
            raise ParseError(path, lineno, "missing counts line") from None
    try:
        nv, nf = int(tok[0]), int(tok[1])
    except (ValueError, IndexError):
        raise ParseError(path, lineno, "bad counts line") from None
    verts, faces = [], []
    for lineno, tok in it:
        if len(verts) < nv:
            try:
                verts.append([float(x) for x in tok[:3]])
            except ValueError:
                raise ParseError(path, lineno, "bad vertex coordinate") from None
            if len(tok) < 3:
                raise ParseError(path, lineno, "vertex needs 3 coordinates")
        elif len(faces) < nf:
            try:
                n = int(tok[0])
                idx = [int(x) for x in tok[1:n + 1]]
            except ValueError:
                raise ParseError(path, lineno, "bad face record") from None
            if n != 3 or len(idx) != 3:
                raise ParseError(path, lineno, "only triangular faces are supported")
            faces.append(idx)
    if len(verts) != nv or len(faces) != nf:
        raise ParseError(path, lineno, f"expected {nv} vertices and {nf} faces")
    return np.array(verts), np.array(faces, dtype=np.int64)


def read_obj(path):
    """Read vertices and triangular faces of an OBJ file (other records ignored)."""
    verts, faces = [], []
    for lineno, tok in _tokens(path):
        if tok[0] == "v":
            try:
                verts.append([float(x) for x in tok[1:4]])
            except ValueError:
                raise ParseError(path, lineno, "bad vertex coordinate") from None
            if len(tok) < 4:
                raise ParseError(path, lineno, "vertex needs 3 coordinates")
        elif tok[0] == "f":
            if len(tok) != 4:
                raise ParseError(path, lineno, "only triangular faces are supported")
            idx = []
            for t in tok[1:]:
                try:
                    i = int(t.split("/")[0])
                except ValueError:
                    raise ParseError(path, lineno, f"bad face index {t!r}") from None
                idx.append(i - 1 if i > 0 else len(verts) + i)
            faces.append(idx)
    if not verts or not faces:
        raise ParseError(path, 1, "no vertices or faces found")
    return np.array(verts), np.array(faces, dtype=np.int64)


def read_mesh(path):
    path = Path(path)
    if path.suffix.lower() == ".off":
        return read_off(path)
    if path.suffix.lower() == ".obj":
        return read_obj(path)
    raise ParseError(path, 0, f"unsupported mesh format {path.suffix!r}")


def write_mesh(mesh, path):
    """Write the vertex skeleton (current positions) as OFF or OBJ."""
    path = Path(path)
    if isinstance(mesh, CurvedMesh):
        v, t = mesh.vertices, mesh.ref.triangles
    else:
        v, t = mesh.vertices, mesh.triangles
    lines = []
    if path.suffix.lower() == ".off":
        lines.append("OFF")
        lines.append(f"{len(v)} {len(t)} 0")
        lines += [f"{x!r} {y!r} {z!r}" for x, y, z in v.tolist()]
        lines += [f"3 {a} {b} {c}" for a, b, c in t.tolist()]
    elif path.suffix.lower() == ".obj":
        lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in v.tolist()]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in t.tolist()]
    else:
        raise ParseError(path, 0, f"unsupported mesh format {path.suffix!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_mesh(path, order):
    v, t = read_mesh(path)
    return linear_to_order(ReferenceTriangulation(v, t), v, order)


def load_mesh_sequence(paths, order):
    """Load frames sharing one connectivity and elevate each to order ``order``."""
    paths = list(paths)
    if not paths:
        raise ValueError("empty mesh sequence")
    v0, t0 = read_mesh(paths[0])
    ref = ReferenceTriangulation(v0, t0)
    meshes = [linear_to_order(ref, v0, order)]
    for p in paths[1:]:
        v, t = read_mesh(p)
        if len(v) != ref.n_vertices or t.shape != ref.triangles.shape or not np.array_equal(t, ref.triangles):
            raise ConnectivityMismatch(f"{p}: connectivity differs from {paths[0]}")
        meshes.append(linear_to_order(ref, v, order))
    logger.info("loaded %d frames with %d triangles", len(meshes), ref.n_triangles)
    return meshes
