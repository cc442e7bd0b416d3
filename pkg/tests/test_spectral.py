import numpy as np
import pytest
import scipy.linalg

from conftest import path_graph, random_connected_graph
from spectrometer import ConvergenceError, DomainError, FormatError, TriMesh, compute_basis, load_basis, save_basis
from spectrometer.operators import cotangent_laplacian, unnormalized_laplacian
from spectrometer.sampler import farthest_point_sample
from spectrometer.shapes import grid, icosphere, knn_graph, torus
from spectrometer.spectral import MAGIC, eigen_residuals


def test_p3_unnormalized_eigenvalues():
    b = compute_basis(path_graph(3), "unnormalized", 3)
    oracle = np.linalg.eigvalsh(unnormalized_laplacian(path_graph(3)).toarray())
    assert np.allclose(b.lambdas, oracle, atol=1e-12)
    assert np.allclose(b.lambdas, [0.0, 1.0, 3.0], atol=1e-12)
    assert b.num_constant == 1


@pytest.mark.parametrize("operator", ["mesh", "unnormalized", "random_walk"])
def test_connected_has_one_zero_mode(ico3, operator):
    b = compute_basis(ico3, operator, 20)
    assert b.num_constant == 1
    assert b.lambdas[0] == 0.0 and b.lambdas[1] > 1e-6


def test_two_triangles_two_constant_modes():
    v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]])
    b = compute_basis(TriMesh(v, np.array([[0, 1, 2], [3, 4, 5]])), "mesh", 2)
    assert b.num_constant == 2
    assert np.allclose(b.lambdas, 0.0)
    assert not b.grad_phis.any()


def _check_basis(domain, b, L, m):
    assert np.all(np.diff(b.lambdas) >= -1e-12)
    assert abs(b.lambdas[0]) <= 1e-8 * b.lambdas[-1]
    gram = b.phis.T @ (m[:, None] * b.phis)
    assert np.abs(gram - np.eye(b.k)).max() <= 1e-6
    assert eigen_residuals(L, m, b.lambdas, b.phis).max() <= 1e-8
    assert not b.grad_phis[:, : b.num_constant].any()


@pytest.mark.parametrize("k", [20, 60])
def test_mesh_basis_invariants_sparse_path(ico3, k):
    b = compute_basis(ico3, "mesh", k)
    L, M = cotangent_laplacian(ico3)
    _check_basis(ico3, b, L, M.diagonal())
    assert np.allclose(b.mass, M.diagonal())
    assert b.mass_trace == pytest.approx(ico3.area)


def test_mesh_basis_invariants_dense_path():
    mesh = torus(12, 8)
    b = compute_basis(mesh, "mesh", 30)
    L, M = cotangent_laplacian(mesh)
    _check_basis(mesh, b, L, M.diagonal())


def test_random_walk_basis():
    g = knn_graph(np.random.default_rng(0).uniform(size=(700, 3)), 6)
    b = compute_basis(g, "random_walk", 40)
    assert np.all(b.lambdas >= 0) and np.all(b.lambdas <= 2)
    # right eigenvectors of I - A^{-1} W
    Lrw = np.eye(g.n) - np.diag(1 / g.degrees) @ g.adjacency.toarray()
    r = Lrw @ b.phis - b.phis * b.lambdas
    assert np.abs(r).max() <= 1e-8
    assert np.allclose(b.phis.T @ (g.degrees[:, None] * b.phis), np.eye(b.k), atol=1e-6)


def test_random_walk_full_spectrum_in_0_2():
    for seed in range(10):
        g = random_connected_graph(np.random.default_rng(seed), 14, extra=0.4)
        b = compute_basis(g, "random_walk", 14)
        assert b.lambdas.min() >= 0 and b.lambdas.max() <= 2 + 1e-12


def test_eigenvalues_stable_under_larger_k(ico3):
    a = compute_basis(ico3, "mesh", 40)
    b = compute_basis(ico3, "mesh", 70)
    assert np.allclose(a.lambdas[1:], b.lambdas[1:40], rtol=1e-6)


def test_deterministic(ico3):
    a = compute_basis(ico3, "mesh", 30)
    b = compute_basis(ico3, "mesh", 30)
    assert np.array_equal(a.phis, b.phis)


def test_sign_convention(ico3_basis):
    phis = ico3_basis.phis
    idx = np.argmax(np.abs(phis), axis=0)
    assert np.all(phis[idx, np.arange(phis.shape[1])] > 0)


def test_full_basis_heat_propagator_oracle():
    mesh = torus(6, 5)
    b = compute_basis(mesh, "mesh", mesh.n)
    L, M = cotangent_laplacian(mesh)
    m = M.diagonal()
    t = 0.03
    spectral = b.phis @ np.diag(np.exp(-b.lambdas * t)) @ b.phis.T @ np.diag(m)
    dense = scipy.linalg.expm(-t * np.diag(1 / m) @ L.toarray())
    assert np.abs(spectral - dense).max() <= 1e-6


def test_bad_arguments(ico3):
    with pytest.raises(ValueError, match="unknown operator"):
        compute_basis(ico3, "cotan", 5)
    with pytest.raises(DomainError):
        compute_basis(path_graph(4), "mesh", 2)
    with pytest.raises(DomainError, match="k must be"):
        compute_basis(path_graph(4), "unnormalized", 5)


def test_truncated(ico3_basis):
    t = ico3_basis.truncated(10)
    assert t.k == 10 and np.array_equal(t.phis, ico3_basis.phis[:, :10])


def test_constant_combination(ico3_basis):
    b = ico3_basis
    assert np.allclose(b.phis[:, :1] @ b.constant_combination, 1.0)


# ---------------------------------------------------------------------------
# container


def _fields_equal(a, b):
    for name in ("lambdas", "phis", "grad_phis", "mass", "element_weights"):
        x, y = getattr(a, name), getattr(b, name)
        assert x.shape == y.shape and x.tobytes() == y.tobytes(), name
    for name in ("group", "mass_trace", "domain_kind", "operator", "num_constant", "n", "k"):
        assert getattr(a, name) == getattr(b, name), name


@pytest.mark.parametrize("operator", ["mesh", "random_walk"])
def test_save_load_bitwise(tmp_path, ico3, operator):
    b = compute_basis(ico3, operator, 12)
    save_basis(b, tmp_path / "b.basis")
    r = load_basis(tmp_path / "b.basis")
    _fields_equal(b, r)
    assert r.samples is None


def test_save_load_with_samples(tmp_path, ico3, ico3_basis):
    s = farthest_point_sample(ico3, 30, seed=4)
    b = ico3_basis.with_samples(s)
    save_basis(b, tmp_path / "s.basis")
    r = load_basis(tmp_path / "s.basis")
    _fields_equal(b, r)
    assert r.samples.vertices == s.vertices
    assert r.samples.elements == s.elements
    assert r.samples.seed == 4 and r.samples.oracle == "fmm"


def test_save_is_byte_deterministic(tmp_path, ico3_basis):
    save_basis(ico3_basis, tmp_path / "a")
    save_basis(ico3_basis, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert (tmp_path / "a").read_bytes()[:8] == MAGIC


def test_load_rejects_bad_files(tmp_path, ico3_basis):
    p = tmp_path / "b.basis"
    save_basis(ico3_basis, p)
    data = p.read_bytes()
    (tmp_path / "magic").write_bytes(b"NOTBASIS" + data[8:])
    with pytest.raises(FormatError, match="not a basis file"):
        load_basis(tmp_path / "magic")
    (tmp_path / "short").write_bytes(data[: len(data) // 2])
    with pytest.raises(FormatError, match="truncated"):
        load_basis(tmp_path / "short")
    flipped = bytearray(data)
    flipped[200] ^= 0xFF
    (tmp_path / "crc").write_bytes(bytes(flipped))
    with pytest.raises(FormatError, match="checksum"):
        load_basis(tmp_path / "crc")
    bumped = bytearray(data)
    bumped[8] = 9
    (tmp_path / "ver").write_bytes(bytes(bumped))
    with pytest.raises(FormatError, match="version"):
        load_basis(tmp_path / "ver")


def test_convergence_error_carries_residual():
    e = ConvergenceError("x", residual=1.5)
    assert e.residual == 1.5 and isinstance(e, RuntimeError)


def test_container_layout_matches_docs(tmp_path, ico3, ico3_basis):
    import struct
    import zlib

    s = farthest_point_sample(ico3, 10)
    b = ico3_basis.with_samples(s)
    save_basis(b, tmp_path / "b")
    data = (tmp_path / "b").read_bytes()
    assert struct.unpack_from("<I", data, 8) == (1,)
    n, k, rows, group, dom, op, trace, c, nsv, nse, seed, oracle = struct.unpack_from("<QQQIBBdIQQqB", data, 12)
    assert (n, k, rows, group, dom, op, c) == (642, 64, 3 * ico3.num_faces, 3, 0, 0, 1)
    assert (nsv, nse, seed, oracle) == (10, len(s.elements), 0, 2)
    assert len(data) == 79 + 8 * (k + n + rows // group + n * k + rows * k + nsv + nse) + 4
    lam = np.frombuffer(data, "<f8", k, 79)
    assert np.array_equal(lam, b.lambdas)
    phi_off = 79 + 8 * (k + n + rows // group)
    assert np.array_equal(np.frombuffer(data, "<f8", n, phi_off), b.phis[:, 0])
    assert struct.unpack_from("<I", data, len(data) - 4)[0] == zlib.crc32(data[:-4])
