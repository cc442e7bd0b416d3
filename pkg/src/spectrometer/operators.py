"""Laplacians, lumped mass matrix and discrete gradients for graphs and meshes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DomainError
from .graph_core import DegenerateFaceWarning, TriMesh, WeightedGraph

__all__ = [
    "COT_CLAMP",
    "GradientOperator",
    "unnormalized_laplacian",
    "random_walk_laplacian",
    "cotangent_laplacian",
    "build_gradient",
]

COT_CLAMP = 1e4


def unnormalized_laplacian(g: WeightedGraph) -> sparse.csr_matrix:
    """``L_u = A - W`` with ``A`` the diagonal degree matrix."""
    return (sparse.diags(g.degrees) - g.adjacency).tocsr()


def random_walk_laplacian(g: WeightedGraph) -> sparse.csr_matrix:
    """``L_rw = I - A^{-1} W``. Not symmetric; ``I - L_rw`` is row-stochastic."""
    deg = g.degrees
    if np.any(deg <= 0):
        v = int(np.argmax(deg <= 0))
        raise DomainError(f"zero degree at vertex {v}")
    return (sparse.identity(g.n, format="csr") - sparse.diags(1.0 / deg) @ g.adjacency).tocsr()


def _corner_cotangents(mesh: TriMesh) -> np.ndarray:
    """(F, 3) cotangent of the interior angle at each face corner, clamped."""
    p = mesh.vertices[mesh.faces]
    cots = np.empty((mesh.num_faces, 3))
    for c in range(3):
        u = p[:, (c + 1) % 3] - p[:, c]
        v = p[:, (c + 2) % 3] - p[:, c]
        dot = np.einsum("ij,ij->i", u, v)
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cots[:, c] = dot / cross
    cots[np.isnan(cots)] = 0.0
    return np.clip(cots, -COT_CLAMP, COT_CLAMP)


def cotangent_laplacian(mesh: TriMesh) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Cotangent stiffness matrix and lumped (barycentric) mass matrix.

    Edge weights are ``(cot(alpha) + cot(beta)) / 2`` over the angles facing the
    edge; boundary edges get a single term. ``M_ii`` is one third of the area of
    the faces around vertex ``i``.

    Returns
    -------
    stiffness : (n, n) csr_matrix
        Symmetric, zero row sums.
    mass : (n, n) csr_matrix
        Diagonal, ``trace(mass) == mesh.area``.
    """
    if mesh.degenerate_faces.any():
        warnings.warn(
            f"cotangents clamped to +-{COT_CLAMP:g} on {int(mesh.degenerate_faces.sum())} degenerate face(s)",
            DegenerateFaceWarning,
            stacklevel=2,
        )
    n, f = mesh.n, mesh.faces
    cots = _corner_cotangents(mesh)
    # corner c faces the edge between the other two corners
    ii = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    jj = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    ww = 0.5 * np.concatenate([cots[:, 0], cots[:, 1], cots[:, 2]])
    W = sparse.coo_matrix((ww, (ii, jj)), shape=(n, n)).tocsr()
    W = W + W.T
    L = (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()
    L.sum_duplicates()
    m = np.zeros(n)
    np.add.at(m, f.ravel(), np.repeat(mesh.face_areas / 3.0, 3))
    return L, sparse.diags(m).tocsr()


@dataclass(frozen=True, eq=False)
class GradientOperator:
    """Sparse map from vertex functions to per-face vectors or per-edge scalars.

    For meshes ``matrix`` is (3F, n) with face ``f`` occupying rows
    ``3f, 3f+1, 3f+2`` (ambient x, y, z). For graphs ``matrix`` is (E, n),
    row ``e`` giving ``(f_i - f_j) / w_ij``. ``group`` is the number of rows
    per gradient element (3 or 1).
    """

    kind: str
    matrix: sparse.csr_matrix
    group: int
    element_weights: np.ndarray  # face areas or ones
    normals: np.ndarray | None = None
    degenerate: np.ndarray | None = None

    @property
    def num_elements(self) -> int:
        return self.matrix.shape[0] // self.group

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Gradient of ``f`` reshaped to (elements, group) (or (elements, group, m) for 2-D ``f``)."""
        g = self.matrix @ f
        return g.reshape((self.num_elements, self.group) + g.shape[1:])

    def rows_of(self, elements: np.ndarray) -> np.ndarray:
        elements = np.asarray(elements, dtype=np.int64)
        return (elements[:, None] * self.group + np.arange(self.group)[None, :]).ravel()


def _mesh_gradient(mesh: TriMesh) -> GradientOperator:
    F, f, p = mesh.num_faces, mesh.faces, mesh.vertices[mesh.faces]
    nrm = mesh.face_normals
    area = mesh.face_areas
    bad = mesh.degenerate_faces
    if bad.any():
        warnings.warn(
            f"gradient rows zeroed on {int(bad.sum())} degenerate face(s)", DegenerateFaceWarning, stacklevel=3
        )
    inv2a = np.zeros(F)
    inv2a[~bad] = 1.0 / (2.0 * area[~bad])
    rows, cols, vals = [], [], []
    for c in range(3):
        # edge opposite corner c, counterclockwise
        e = p[:, (c + 2) % 3] - p[:, (c + 1) % 3]
        s = np.cross(nrm, e) * inv2a[:, None]
        for d in range(3):
            rows.append(3 * np.arange(F) + d)
            cols.append(f[:, c])
            vals.append(s[:, d])
    G = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(3 * F, mesh.n)
    )
    return GradientOperator("mesh", G, 3, area.copy(), nrm, bad)


def _graph_gradient(g: WeightedGraph) -> GradientOperator:
    if g.num_edges and np.any(g.w <= 0):
        raise DomainError("zero-weight edge; per-edge gradient undefined")
    E = g.num_edges
    r = np.arange(E)
    inv = 1.0 / g.w
    G = sparse.csr_matrix(
        (np.concatenate([inv, -inv]), (np.concatenate([r, r]), np.concatenate([g.i, g.j]))), shape=(E, g.n)
    )
    return GradientOperator("graph", G, 1, np.ones(E))


def build_gradient(domain: TriMesh | WeightedGraph) -> GradientOperator:
    """Piecewise-linear face gradient for meshes, per-edge difference quotient for graphs."""
    if isinstance(domain, TriMesh):
        return _mesh_gradient(domain)
    if isinstance(domain, WeightedGraph):
        return _graph_gradient(domain)
    raise TypeError(f"unsupported domain type {type(domain).__name__}")
