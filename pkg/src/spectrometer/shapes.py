"""Synthetic test domains: icospheres, tori, flat grids and k-NN graphs."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError
from .graph_core import TriMesh, WeightedGraph

__all__ = ["icosahedron", "icosphere", "ellipsoid", "torus", "grid", "knn_graph", "from_spec"]


def icosahedron() -> TriMesh:
    phi = (1.0 + 5**0.5) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return TriMesh(v, f)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriMesh:
    """Loop-style midpoint subdivision of the icosahedron, projected to the sphere.

    Vertex count is ``10 * 4**subdivisions + 2`` (642 at 3, 2562 at 4).
    """
    base = icosahedron()
    verts = [tuple(p) for p in base.vertices]
    faces = base.faces.tolist()
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = (np.asarray(verts[a]) + np.asarray(verts[b])) / 2.0
                verts.append(tuple(p / np.linalg.norm(p)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    return TriMesh(np.asarray(verts) * radius, np.asarray(faces))


def ellipsoid(subdivisions: int = 4, axes=(1.0, 0.75, 0.5)) -> TriMesh:
    """Icosphere with coordinates scaled per axis."""
    s = icosphere(subdivisions)
    return TriMesh(s.vertices * np.asarray(axes, dtype=float), s.faces)


def torus(nu: int, nv: int, major: float = 1.0, minor: float = 0.4) -> TriMesh:
    """Regular ``nu x nv`` torus grid (``nu * nv`` vertices, outward normals)."""
    u = 2 * np.pi * np.arange(nu) / nu
    v = 2 * np.pi * np.arange(nv) / nv
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (major + minor * np.cos(vv)) * np.cos(uu)
    y = (major + minor * np.cos(vv)) * np.sin(uu)
    z = minor * np.sin(vv)
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    a = np.arange(nu)[:, None] * nv + np.arange(nv)[None, :]
    b = ((np.arange(nu)[:, None] + 1) % nu) * nv + np.arange(nv)[None, :]
    c = ((np.arange(nu)[:, None] + 1) % nu) * nv + (np.arange(nv)[None, :] + 1) % nv
    d = np.arange(nu)[:, None] * nv + (np.arange(nv)[None, :] + 1) % nv
    faces = np.concatenate(
        [np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)]
    )
    return TriMesh(verts, faces)


def grid(nx: int, ny: int | None = None, width: float = 1.0, height: float | None = None) -> TriMesh:
    """Flat triangulated rectangle in the z=0 plane, counterclockwise faces."""
    ny = nx if ny is None else ny
    height = width if height is None else height
    xs = np.linspace(0.0, width, nx)
    ys = np.linspace(0.0, height, ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)], axis=-1)
    idx = np.arange(nx * ny).reshape(nx, ny)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    faces = np.concatenate([np.stack([a, b, c], -1), np.stack([a, c, d], -1)])
    return TriMesh(verts, faces)


def knn_graph(points: np.ndarray, k: int) -> WeightedGraph:
    """Symmetrized k-nearest-neighbour graph weighted by Euclidean distance."""
    points = np.asarray(points, dtype=float)
    tree = cKDTree(points)
    dist, nbr = tree.query(points, k=k + 1)
    rows = np.repeat(np.arange(len(points)), k)
    cols = nbr[:, 1:].ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = np.unique(np.stack([lo, hi], 1), axis=0)
    w = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    return WeightedGraph.from_arrays(len(points), pairs[:, 0], pairs[:, 1], w)


def from_spec(spec: str) -> TriMesh:
    """Build a mesh from a generator string.

    ``icosphere:4``, ``ellipsoid:4``, ``torus:70x70``, ``grid:33`` or ``grid:33x17``.
    """
    name, _, arg = spec.partition(":")
    if name == "icosphere":
        return icosphere(int(arg or 3))
    if name == "ellipsoid":
        return ellipsoid(int(arg or 4))
    if name in ("torus", "grid"):
        dims = [int(x) for x in arg.lower().split("x")] if arg else [32]
        if name == "torus":
            return torus(dims[0], dims[-1])
        return grid(dims[0], dims[-1])
    raise DomainError(f"unknown shape generator {spec!r}")
