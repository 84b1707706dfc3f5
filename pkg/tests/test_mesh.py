import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evosurf.errors import ConnectivityMismatch, FoldedElement, InvalidMesh, ParseError
from evosurf.fem import ScalarSpace, interpolate
from evosurf.mesh import (
    CurvedMesh,
    ReferenceTriangulation,
    displace,
    load_mesh,
    load_mesh_sequence,
    make_icosphere,
    mesh_size,
    read_mesh,
    write_mesh,
)

TETRA_V = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
TETRA_T = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]


def test_icosahedron_counts(sphere0):
    assert sphere0.n_elements == 20
    assert sphere0.ref.n_vertices == 12
    assert sphere0.ref.n_edges == 30


def test_refined_counts(sphere1):
    assert sphere1.n_elements == 80
    assert sphere1.ref.n_vertices == 42


def test_sphere_nodes_on_sphere(sphere1):
    np.testing.assert_allclose(np.linalg.norm(sphere1.nodes, axis=1), 1.0, atol=1e-15)


def test_level0_edge_length(sphere0):
    assert mesh_size(sphere0) == pytest.approx(4 / np.sqrt(10 + 2 * np.sqrt(5)), rel=1e-14)


def test_mesh_size_ratio():
    h = [mesh_size(make_icosphere(l, 1)) for l in range(5)]
    # the first refinement of the raw icosahedron is coarser: 0.618 / 1.0515
    assert h[1] / h[0] == pytest.approx(0.5878, abs=1e-4)
    for a, b in zip(h[1:], h[2:]):
        assert 0.45 <= b / a <= 0.55


def test_area_converges_with_order_k_plus_1():
    k = 3
    meshes = [make_icosphere(l, k) for l in (1, 2, 3)]
    err = [abs(m.area() - 4 * np.pi) for m in meshes]
    h = [mesh_size(m) for m in meshes]
    orders = np.log(np.divide(err[:-1], err[1:])) / np.log(np.divide(h[:-1], h[1:]))
    assert np.all(orders >= k + 1 - 0.1), orders
    assert err[-1] < 5e-5


@pytest.mark.parametrize("radius", [0.5, 2.0])
def test_radius_and_center(radius):
    m = make_icosphere(1, 3, radius=radius, center=(1.0, -2.0, 0.5))
    assert m.area() == pytest.approx(4 * np.pi * radius**2, rel=1e-2)
    np.testing.assert_allclose(m.nodes.mean(axis=0), [1.0, -2.0, 0.5], atol=1e-12)


def test_nodal_continuity(sphere1):
    # every element copy of a shared global node is the same vector
    gn = sphere1.geom_nodes
    l2g = sphere1.l2g
    for e in range(sphere1.n_elements):
        assert np.array_equal(gn[e], sphere1.nodes[l2g[e]])
    flat = sphere1.ref.lagrange_points(3)
    assert len(flat) == sphere1.ref.dof_count(3)


def test_dof_count_formula(sphere1):
    ref = sphere1.ref
    for k in (1, 2, 3, 4):
        expect = ref.n_vertices + (k - 1) * ref.n_edges + (k - 1) * (k - 2) // 2 * ref.n_triangles
        assert ref.dof_count(k) == expect


def test_edge_nodes_canonical_direction(sphere0):
    ref = sphere0.ref
    l2g = ref.dof_map(3)
    nv = ref.n_vertices
    # the first interior node of each edge lies closer to its lower-index vertex
    for e, (a, b) in enumerate(ref.edges):
        node = sphere0.nodes[nv + 2 * e]
        assert np.linalg.norm(node - sphere0.nodes[a]) < np.linalg.norm(node - sphere0.nodes[b])
    assert l2g.max() == ref.dof_count(3) - 1


def test_translation_keeps_h(sphere1):
    moved = displace(sphere1, np.tile([0.3, -1.0, 2.0], (len(sphere1.nodes), 1)))
    assert mesh_size(moved) == pytest.approx(mesh_size(sphere1), rel=1e-14)
    assert moved.area() == pytest.approx(sphere1.area(), rel=1e-13)


def test_zero_displacement_identity(sphere1):
    same = displace(sphere1, np.zeros_like(sphere1.nodes))
    assert np.array_equal(same.nodes, sphere1.nodes)


def test_normal_displacement_area(sphere2):
    space = ScalarSpace(sphere2, 3)
    Y = interpolate(space, lambda x: 0.1 * x / np.linalg.norm(x, axis=1, keepdims=True))
    grown = displace(sphere2, Y)
    assert grown.area() == pytest.approx(4 * np.pi * 1.21, rel=1e-3)
    assert abs(grown.area() / sphere2.area() - 1.21) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-4, 1e-2))
def test_displace_roundtrip(seed, scale):
    mesh = make_icosphere(1, 2)
    Y = scale * np.random.default_rng(seed).standard_normal(mesh.nodes.shape)
    back = displace(displace(mesh, Y), -Y)
    np.testing.assert_allclose(back.nodes, mesh.nodes, rtol=0, atol=1e-12)


def test_fold_detected():
    mesh = make_icosphere(1, 2)
    v, l2g = mesh.nodes, mesh.l2g
    Y = np.zeros_like(v)
    # drag an edge node far past the end of its edge: the quadratic map folds
    Y[l2g[0, 3]] = 2.0 * (v[l2g[0, 1]] - v[l2g[0, 0]])
    with pytest.raises(FoldedElement):
        displace(mesh, Y)


def test_displacement_shape_checked(sphere1):
    with pytest.raises(ConnectivityMismatch):
        displace(sphere1, np.zeros((3, 3)))


def test_wrong_node_count():
    ref = ReferenceTriangulation(TETRA_V, TETRA_T)
    with pytest.raises(InvalidMesh):
        CurvedMesh(ref, 2, np.zeros((5, 3)))


@pytest.mark.parametrize(
    "tris",
    [
        TETRA_T[:3],  # open
        [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 3, 2]],  # inconsistent winding
        [[0, 1, 1], [0, 3, 1], [0, 2, 3], [1, 3, 2]],  # repeated index
    ],
)
def test_invalid_triangulations(tris):
    with pytest.raises(InvalidMesh):
        ReferenceTriangulation(TETRA_V, tris)


def test_tetrahedron_is_valid():
    ref = ReferenceTriangulation(TETRA_V, TETRA_T)
    assert ref.n_edges == 6
    assert ref.dof_count(2) == 10


@pytest.mark.parametrize("suffix", [".off", ".obj"])
def test_write_read_roundtrip(tmp_path, sphere1, suffix):
    path = write_mesh(sphere1, tmp_path / f"s{suffix}")
    v, t = read_mesh(path)
    assert np.array_equal(v, sphere1.vertices)
    assert np.array_equal(t, sphere1.ref.triangles)
    mesh = load_mesh(path, 3)
    assert mesh.ref.same_connectivity(sphere1.ref)


def test_sequence_identical_copies(tmp_path, sphere1):
    a = write_mesh(sphere1, tmp_path / "a.off")
    b = write_mesh(sphere1, tmp_path / "b.off")
    m1, m2 = load_mesh_sequence([a, b], 3)
    assert np.array_equal(m1.nodes, m2.nodes)
    assert m1.ref is m2.ref


def test_sequence_of_three(tmp_path):
    paths = []
    for i, r in enumerate((1.0, 1.1, 0.9)):
        paths.append(write_mesh(make_icosphere(1, 1, radius=r), tmp_path / f"f{i}.obj"))
    meshes = load_mesh_sequence(paths, 3)
    assert len(meshes) == 3
    for m in meshes:
        m.ref.validate()
        m.check_geometry()


def test_sequence_connectivity_mismatch(tmp_path):
    a = write_mesh(make_icosphere(0, 1), tmp_path / "a.off")
    b = write_mesh(make_icosphere(1, 1), tmp_path / "b.off")
    with pytest.raises(ConnectivityMismatch):
        load_mesh_sequence([a, b], 2)


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 x\n0 1 0\n3 0 1 2\n")
    with pytest.raises(ParseError) as info:
        read_mesh(p)
    assert info.value.line == 4
    assert "bad.off" in str(info.value)


def test_parse_error_quads(tmp_path):
    p = tmp_path / "quad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(ParseError):
        read_mesh(p)


def test_unknown_format(tmp_path):
    p = tmp_path / "m.stl"
    p.write_text("solid")
    with pytest.raises(ParseError):
        read_mesh(p)
