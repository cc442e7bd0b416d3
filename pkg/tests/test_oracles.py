import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import connected_graphs, path_graph, random_connected_graph
from spectrometer import DomainError, TriMesh, WeightedGraph, brute_force, dijkstra, fast_marching, mesh_to_graph, run_oracle
from spectrometer.oracles import _triangle_update
from spectrometer.shapes import grid, icosphere, torus


def test_dijkstra_path():
    g = path_graph(3, [1.0, 2.0])
    assert dijkstra(g, [0]).values.tolist() == [0.0, 1.0, 3.0]
    assert dijkstra(g, [0, 2]).values.tolist() == [0.0, 1.0, 0.0]


def test_dijkstra_unreachable_is_inf():
    g = WeightedGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    d = dijkstra(g, [0]).values
    assert d[1] == 1.0 and np.isinf(d[2:]).all()


def test_dijkstra_bound_prunes_but_keeps_improvements():
    g = path_graph(5)
    bound = np.array([0.0, 0.5, 5.0, 5.0, 0.5])
    d = dijkstra(g, [2], bound=bound).values
    # only vertices whose distance beats the bound are settled; the rest stay inf
    assert d[2] == 0 and d[3] == 1
    assert np.isinf(d[[0, 1, 4]]).all()


def test_brute_force_examples():
    tri = WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)])
    assert brute_force(tri, 0).values.tolist() == [0.0, 1.0, 2.0]
    assert brute_force(WeightedGraph.from_edges(2, [(0, 1, 2.5)]), 0).values.tolist() == [0.0, 2.5]
    assert brute_force(path_graph(4), 0).values.tolist() == [0.0, 1.0, 2.0, 3.0]
    with pytest.raises(DomainError, match="brute force"):
        brute_force(path_graph(13), 0)


def test_dijkstra_equals_brute_force_200_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(2, 11))
        g = random_connected_graph(rng, n, extra=rng.uniform(0.0, 0.6))
        s = int(rng.integers(n))
        assert np.array_equal(dijkstra(g, [s]).values, brute_force(g, s).values)


@settings(max_examples=60, deadline=None)
@given(connected_graphs(max_n=10), st.integers(0, 9))
def test_dijkstra_matches_brute_force_property(g, s):
    s = s % g.n
    assert np.array_equal(dijkstra(g, [s]).values, brute_force(g, s).values)


def _all_pairs(g):
    return np.array([dijkstra(g, [s]).values for s in range(g.n)])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 14))
def test_dijkstra_triangle_inequality_exact(seed, n):
    # integer weights: all path sums are exact in floating point
    rng = np.random.default_rng(seed)
    g0 = random_connected_graph(rng, n)
    g = WeightedGraph.from_arrays(n, g0.i, g0.j, rng.integers(1, 20, g0.num_edges).astype(float))
    D = _all_pairs(g)
    assert np.array_equal(D, D.T)
    # D[a, c] <= D[a, b] + D[b, c] for every triple
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :])


@settings(max_examples=40, deadline=None)
@given(connected_graphs(min_n=3, max_n=14))
def test_dijkstra_triangle_inequality_real_weights(g):
    D = _all_pairs(g)
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-12 * D.max())


def test_dijkstra_multi_source_is_min(ico3):
    g = mesh_to_graph(ico3)
    d = dijkstra(g, [3, 100, 400]).values
    ref = np.min([dijkstra(g, [s]).values for s in (3, 100, 400)], axis=0)
    assert np.array_equal(d, ref)


def test_fmm_flat_grid_vs_euclidean():
    mesh = grid(33, 33)
    d = fast_marching(mesh, [0]).values
    exact = np.linalg.norm(mesh.vertices - mesh.vertices[0], axis=1)
    assert np.abs(d - exact).max() <= 0.01 * mesh.bbox_diagonal
    assert d[0] == 0.0


def test_fmm_two_point_sources_give_edge_height():
    # sources at both ends of AB: the front is the line AB, so d(C) is C's height
    v = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.4, 0.7, 0]])
    mesh = TriMesh(v, np.array([[0, 1, 2]]))
    d = fast_marching(mesh, [0, 1]).values
    assert d.tolist()[:2] == [0.0, 0.0]
    assert d[2] == pytest.approx(0.7, abs=1e-14)


@pytest.mark.parametrize("sx, sy", [(0.3, -0.8), (0.5, -2.0), (0.9, -0.1)])
def test_triangle_update_virtual_source(sx, sy):
    # planar A=(0,0), B=(c,0), C=(xc,yc); distances from a point source below AB
    c, xc, yc = 1.0, 0.45, 0.8
    dA, dB = math.hypot(sx, sy), math.hypot(sx - c, sy)
    a, b = math.hypot(xc - c, yc), math.hypot(xc, yc)
    got = _triangle_update(dA, dB, a, b, c)
    assert got == pytest.approx(math.hypot(xc - sx, yc - sy), abs=1e-12)


def test_triangle_update_plane_wave():
    c, xc, yc = 1.0, 0.5, 0.6
    gx = 0.3
    gy = math.sqrt(1 - gx * gx)
    # dA + dB <= c: no virtual point source is consistent, so the plane wave is used
    dA, dB = 0.1, 0.1 + gx * c
    got = _triangle_update(dA, dB, math.hypot(xc - c, yc), math.hypot(xc, yc), c)
    assert got == pytest.approx(dA + gx * xc + gy * yc, abs=1e-12)


def test_triangle_update_rejects_missing_characteristic():
    # front from far to the left: characteristic to C passes left of A
    assert _triangle_update(0.0, 0.999, math.hypot(0.0 - 1, 1.0), math.hypot(0.0, 1.0) + 0.0, 1.0) is None


@pytest.mark.parametrize("mesh", [icosphere(3), torus(30, 14)], ids=["sphere", "torus"])
def test_fmm_at_most_dijkstra(mesh):
    g = mesh_to_graph(mesh)
    for s in (0, mesh.n // 2):
        f = fast_marching(mesh, [s]).values
        d = dijkstra(g, [s]).values
        assert np.all(f <= d + 1e-9)
        assert f[s] == 0.0


def test_fmm_sphere_close_to_great_circle(ico3):
    v = ico3.vertices / np.linalg.norm(ico3.vertices, axis=1, keepdims=True)
    exact = np.arccos(np.clip(v @ v[0], -1, 1))
    f = fast_marching(ico3, [0]).values
    assert np.abs(f - exact).max() <= 0.03 * np.pi


def test_fmm_multi_source(ico3):
    f = fast_marching(ico3, [0, 200]).values
    ref = np.minimum(fast_marching(ico3, [0]).values, fast_marching(ico3, [200]).values)
    assert np.all(f <= ref + 1e-12)
    assert np.abs(f - ref).max() <= 0.02 * np.pi


def test_run_oracle_dispatch(ico3):
    assert run_oracle(ico3, [0]).method == "fmm"
    assert run_oracle(path_graph(4), [0]).method == "dijkstra"
    assert run_oracle(path_graph(4), [0], "brute_force").values.tolist() == [0, 1, 2, 3]
    with pytest.raises(DomainError):
        run_oracle(path_graph(4), [0], "fmm")
