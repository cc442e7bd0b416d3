import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import Delaunay

from conftest import connected_graphs, path_graph
from spectrometer import (
    DomainError,
    TriMesh,
    WeightedGraph,
    build_gradient,
    cotangent_laplacian,
    mesh_to_graph,
    random_walk_laplacian,
    unnormalized_laplacian,
)
from spectrometer.shapes import grid, icosahedron, icosphere, torus


def planar_delaunay(seed, n=40):
    rng = np.random.default_rng(seed)
    pts = np.vstack([rng.uniform(size=(n, 2)), [[0, 0], [1, 0], [1, 1], [0, 1]]])
    tri = Delaunay(pts)
    f = tri.simplices.copy()
    # orient counterclockwise
    p = pts[f]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    f[cross < 0] = f[cross < 0][:, [0, 2, 1]]
    v = np.column_stack([pts, np.zeros(len(pts))])
    return TriMesh(v, f), tri


def test_unnormalized_p3():
    L = unnormalized_laplacian(path_graph(3, [1.0, 2.0])).toarray()
    assert np.array_equal(L, [[1, -1, 0], [-1, 3, -2], [0, -2, 2]])


def test_unnormalized_empty():
    L = unnormalized_laplacian(WeightedGraph.from_edges(4, []))
    assert L.shape == (4, 4)
    assert not L.toarray().any()


@settings(max_examples=60, deadline=None)
@given(connected_graphs(max_n=15))
def test_unnormalized_rows_sum_zero_and_symmetric(g):
    L = unnormalized_laplacian(g).toarray()
    assert np.allclose(L.sum(axis=1), 0.0, atol=1e-12)
    assert np.array_equal(L, L.T)


def test_random_walk_p3():
    L = random_walk_laplacian(path_graph(3)).toarray()
    assert np.allclose(L[1], [-0.5, 1.0, -0.5])


@settings(max_examples=40, deadline=None)
@given(connected_graphs(max_n=12))
def test_random_walk_constant_nullvector(g):
    L = random_walk_laplacian(g).toarray()
    assert np.allclose(L @ np.ones(g.n), 0.0, atol=1e-12)
    assert np.allclose(np.diag(L), 1.0)


def test_random_walk_isolated_vertex():
    with pytest.raises(DomainError, match="zero degree at vertex 2"):
        random_walk_laplacian(WeightedGraph.from_edges(3, [(0, 1, 1.0)]))


def test_cotangent_equilateral():
    v = np.array([[0.0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]])
    L, M = cotangent_laplacian(TriMesh(v, np.array([[0, 1, 2]])))
    L = L.toarray()
    off = L[~np.eye(3, dtype=bool)]
    assert np.allclose(off, -1.0 / (2.0 * np.sqrt(3.0)), atol=1e-14)
    assert np.allclose(M.diagonal(), (np.sqrt(3) / 4) / 3)


def test_cotangent_right_triangle_by_hand():
    # right angle at vertex 0 and 45 degrees at 1 and 2; each edge is a boundary edge
    v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    L, M = cotangent_laplacian(TriMesh(v, np.array([[0, 1, 2]])))
    L = L.toarray()
    assert L[1, 2] == pytest.approx(0.0, abs=1e-15)  # 1/2 cot 90
    assert L[0, 1] == pytest.approx(-0.5)  # 1/2 cot 45
    assert L[0, 2] == pytest.approx(-0.5)
    assert np.allclose(M.diagonal(), 0.5 / 3)


def test_cotangent_mass_trace_is_area():
    m = icosahedron()
    _, M = cotangent_laplacian(m)
    assert abs(M.diagonal().sum() - m.face_areas.sum()) <= 1e-12


@pytest.mark.parametrize("mesh", [icosphere(2), torus(10, 7), grid(6, 5)], ids=["sphere", "torus", "grid"])
def test_laplacians_psd(mesh):
    rng = np.random.default_rng(0)
    L, _ = cotangent_laplacian(mesh)
    Lg = unnormalized_laplacian(mesh_to_graph(mesh))
    assert abs(L - L.T).max() <= 1e-12 * abs(L).max()
    for A in (L, Lg):
        V = rng.standard_normal((mesh.n, 100))
        q = np.einsum("ij,ij->j", V, A @ V)
        assert np.all(q >= -1e-10 * np.einsum("ij,ij->j", V, V))
        assert np.allclose(np.asarray(A.sum(axis=1)).ravel(), 0.0, atol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_cotangent_affine_interior_zero(seed):
    mesh, tri = planar_delaunay(seed)
    L, _ = cotangent_laplacian(mesh)
    a, b, c = np.random.default_rng(seed).standard_normal(3)
    f = a * mesh.vertices[:, 0] + b * mesh.vertices[:, 1] + c
    boundary = np.unique(tri.convex_hull)
    interior = np.setdiff1d(np.arange(mesh.n), boundary)
    assert np.abs((L @ f)[interior]).max() <= 1e-8


def test_gradient_of_x_on_plane():
    mesh = grid(7, 5)
    G = build_gradient(mesh)
    g = G.apply(mesh.vertices[:, 0])
    assert np.allclose(g, [1.0, 0.0, 0.0], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_gradient_affine_exact(seed, a, b, c):
    mesh, _ = planar_delaunay(seed % 1000, n=25)
    g = build_gradient(mesh).apply(a * mesh.vertices[:, 0] + b * mesh.vertices[:, 1] + c)
    assert np.allclose(g, [a, b, 0.0], atol=1e-10 * max(1.0, abs(a), abs(b)))


@pytest.mark.parametrize("mesh", [icosphere(2), torus(9, 6)], ids=["sphere", "torus"])
def test_gradient_constant_and_tangent(mesh):
    G = build_gradient(mesh)
    assert np.abs(G.apply(np.full(mesh.n, 3.7))).max() <= 1e-12
    f = np.random.default_rng(1).standard_normal(mesh.n)
    g = G.apply(f)
    assert np.abs(np.einsum("ij,ij->i", g, mesh.face_normals)).max() <= 1e-10


def test_graph_gradient_p3():
    G = build_gradient(path_graph(3, [1.0, 2.0]))
    assert np.allclose(G.apply(np.array([0.0, 1.0, 3.0])).ravel(), [-1.0, -1.0])
    assert np.allclose(G.apply(np.ones(3)), 0.0)


def test_gradient_kind_and_weights():
    mesh = icosahedron()
    G = build_gradient(mesh)
    assert G.group == 3 and G.num_elements == mesh.num_faces
    assert np.allclose(G.element_weights, mesh.face_areas)
    assert G.rows_of([2]).tolist() == [6, 7, 8]
