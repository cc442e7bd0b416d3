"""Input domains: weighted graphs, triangle meshes, source sets and their file formats.

All vertex indices are 0-based. OFF/OBJ face indices are converted at load time.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import DomainError, FormatError

__all__ = [
    "WeightedGraph",
    "TriMesh",
    "SourceSet",
    "DegenerateFaceWarning",
    "load_graph_edgelist",
    "save_graph_edgelist",
    "load_mesh",
    "save_mesh",
    "mesh_to_graph",
]

log = logging.getLogger(__name__)

# relative to squared bounding-box diagonal
DEGENERATE_AREA_TOL = 1e-12


class DegenerateFaceWarning(UserWarning):
    """A face has (near) zero area."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with nonnegative edge weights.

    Edges are stored canonically with ``i < j``, sorted lexicographically.
    Weights double as edge lengths (shortest paths, per-edge gradients) and as
    Laplacian affinities.
    """

    n: int
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]]) -> "WeightedGraph":
        edges = list(edges)
        if not edges:
            z = np.zeros(0, dtype=np.int64)
            return cls(int(n), z, z.copy(), np.zeros(0))
        arr = np.asarray(edges, dtype=float)
        return cls.from_arrays(n, arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2])

    @classmethod
    def from_arrays(cls, n, i, j, w) -> "WeightedGraph":
        """Validate and canonicalize edge arrays; raise on any invariant violation."""
        n = int(n)
        i = np.asarray(i, dtype=np.int64).ravel()
        j = np.asarray(j, dtype=np.int64).ravel()
        w = np.asarray(w, dtype=float).ravel()
        if not (len(i) == len(j) == len(w)):
            raise DomainError("edge arrays differ in length")
        if len(i):
            if i.min() < 0 or j.min() < 0 or max(i.max(), j.max()) >= n:
                raise DomainError(f"edge index out of range for n={n}")
            if np.any(i == j):
                v = int(i[np.argmax(i == j)])
                raise DomainError(f"self-loop at vertex {v}")
            if np.any(~np.isfinite(w)):
                raise DomainError("non-finite weight")
            if np.any(w < 0):
                raise DomainError("negative weight")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        dup = (np.diff(lo) == 0) & (np.diff(hi) == 0)
        if np.any(dup):
            k = int(np.argmax(dup))
            raise DomainError(f"duplicate edge ({lo[k]}, {hi[k]})")
        return cls(n, lo, hi, w)

    @property
    def num_edges(self) -> int:
        return len(self.i)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.i, self.j, self.w)]

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric weighted adjacency matrix W."""
        rows = np.concatenate([self.i, self.j])
        cols = np.concatenate([self.j, self.i])
        vals = np.concatenate([self.w, self.w])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def connected_components(self) -> tuple[int, np.ndarray]:
        from scipy.sparse.csgraph import connected_components

        # zero-weight edges still connect
        pattern = sparse.csr_matrix(
            (np.ones(2 * self.num_edges), (np.concatenate([self.i, self.j]), np.concatenate([self.j, self.i]))),
            shape=(self.n, self.n),
        )
        return connected_components(pattern, directed=False)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangle mesh with counterclockwise faces.

    Construction checks index validity and distinctness; near-zero-area faces
    only trigger a :class:`DegenerateFaceWarning`.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        f = np.ascontiguousarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise DomainError("vertices must be an (n, 3) array")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise DomainError("faces must be an (F, 3) array")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            bad = int(np.argmax((f < 0).any(1) | (f >= len(v)).any(1)))
            raise DomainError(f"face {bad}: vertex index out of range (n={len(v)})")
        if f.size and np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise DomainError("face with repeated vertex index")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        n_bad = int(self.degenerate_faces.sum())
        if n_bad:
            warnings.warn(f"{n_bad} degenerate face(s) below area tolerance", DegenerateFaceWarning, stacklevel=3)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def _cross(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unit normals; zero for degenerate faces."""
        nrm = np.linalg.norm(self._cross, axis=1, keepdims=True)
        out = np.zeros_like(self._cross)
        ok = nrm[:, 0] > 0
        out[ok] = self._cross[ok] / nrm[ok]
        return out

    @property
    def bbox_diagonal(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    @cached_property
    def degenerate_faces(self) -> np.ndarray:
        return self.face_areas < DEGENERATE_AREA_TOL * self.bbox_diagonal**2

    @property
    def area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with ``e[:, 0] < e[:, 1]``."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def vertex_faces(self) -> sparse.csr_matrix:
        """n x F incidence matrix (vertex in face)."""
        rows = self.faces.ravel()
        cols = np.repeat(np.arange(self.num_faces), 3)
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.num_faces))

    def scaled(self, s: float) -> "TriMesh":
        return TriMesh(self.vertices * s, self.faces)


@dataclass(frozen=True)
class SourceSet:
    """Nonempty set of distinct source vertex indices (order preserved)."""

    indices: tuple[int, ...]
    n: int | None = field(default=None, compare=False)

    def __post_init__(self):
        idx = tuple(int(x) for x in np.atleast_1d(self.indices))
        if not idx:
            raise DomainError("source set is empty")
        if len(set(idx)) != len(idx):
            raise DomainError("duplicate source index")
        if min(idx) < 0 or (self.n is not None and max(idx) >= self.n):
            raise DomainError(f"source index out of range (n={self.n})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, sources, n: int | None = None) -> "SourceSet":
        if isinstance(sources, SourceSet):
            if n is not None and max(sources.indices) >= n:
                raise DomainError(f"source index out of range (n={n})")
            return sources
        return cls(tuple(np.atleast_1d(sources).tolist()), n)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


# ---------------------------------------------------------------------------
# edge lists
# ---------------------------------------------------------------------------


def load_graph_edgelist(path) -> WeightedGraph:
    """Read ``i j w`` lines (tab or space separated, ``#`` comments, ``# n=<count>`` header)."""
    path = Path(path)
    n_header = None
    rows, seen = [], {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip().replace(" ", "")
                if body.startswith("n="):
                    try:
                        n_header = int(body[2:])
                    except ValueError:
                        raise FormatError(f"{path}:{lineno}: bad header {line!r}") from None
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'i j w', got {line!r}")
            try:
                a, b, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed line {line!r}") from None
            if a < 0 or b < 0:
                raise FormatError(f"{path}:{lineno}: negative vertex index")
            if a == b:
                raise DomainError(f"{path}:{lineno}: self-loop at vertex {a}")
            if not np.isfinite(w) or w < 0:
                raise DomainError(f"{path}:{lineno}: negative weight {w}")
            if w == 0:
                raise DomainError(f"{path}:{lineno}: zero weight")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise DomainError(f"{path}:{lineno}: duplicate edge {key} (first on line {seen[key]})")
            seen[key] = lineno
            rows.append((a, b, w))
    n = 1 + max((max(a, b) for a, b, _ in rows), default=-1)
    if n_header is not None:
        if n_header < n:
            raise FormatError(f"{path}: header n={n_header} smaller than max index + 1 = {n}")
        n = n_header
    return WeightedGraph.from_edges(n, rows)


def save_graph_edgelist(g: WeightedGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# n={g.n}\n")
        for a, b, w in zip(g.i, g.j, g.w):
            fh.write(f"{int(a)}\t{int(b)}\t{float(w)!r}\n")


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------


def _fan(poly: Sequence[int]) -> list[tuple[int, int, int]]:
    return [(poly[0], poly[t], poly[t + 1]) for t in range(1, len(poly) - 1)]


def _read_off(path: Path):
    tokens = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                tokens.append(line)
    if not tokens or not tokens[0].upper().startswith("OFF"):
        raise FormatError(f"{path}: missing OFF header")
    head = tokens[0][3:].split()
    body = tokens[1:]
    if not head:
        head, body = body[0].split(), body[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (IndexError, ValueError):
        raise FormatError(f"{path}: bad OFF counts line") from None
    if len(body) < nv + nf:
        raise FormatError(f"{path}: truncated OFF file")
    verts = np.array([[float(x) for x in body[r].split()[:3]] for r in range(nv)])
    faces = []
    for r in range(nv, nv + nf):
        parts = body[r].split()
        cnt = int(parts[0])
        poly = [int(x) for x in parts[1 : 1 + cnt]]
        if len(poly) != cnt or cnt < 3:
            raise FormatError(f"{path}: malformed face line {r + 1}")
        faces.extend(_fan(poly))
    return verts.reshape(-1, 3), faces


def _read_obj(path: Path):
    verts, faces = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                poly = []
                for tok in parts[1:]:
                    idx = int(tok.split("/")[0])
                    # negative indices are relative to the current vertex count
                    poly.append(idx - 1 if idx > 0 else len(verts) + idx)
                if len(poly) < 3:
                    raise FormatError(f"{path}:{lineno}: face with fewer than 3 vertices")
                faces.extend(_fan(poly))
    return np.asarray(verts, dtype=float).reshape(-1, 3), faces


def load_mesh(path, drop_degenerate: bool = False) -> TriMesh:
    """Load an OFF or OBJ file; polygons are fan-triangulated."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".off":
        verts, faces = _read_off(path)
    elif ext == ".obj":
        verts, faces = _read_obj(path)
    else:
        raise FormatError(f"unsupported mesh format {ext!r}")
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
        raise FormatError(f"{path}: face vertex index out of range (n={len(verts)})")
    mesh = TriMesh(verts, faces)
    if drop_degenerate and mesh.degenerate_faces.any():
        log.info("dropping %d degenerate faces", int(mesh.degenerate_faces.sum()))
        mesh = TriMesh(verts, faces[~mesh.degenerate_faces])
    return mesh


def save_mesh(mesh: TriMesh, path) -> None:
    """Write OFF (or OBJ if the suffix says so)."""
    path = Path(path)
    with open(path, "w") as fh:
        if path.suffix.lower() == ".obj":
            for p in mesh.vertices:
                fh.write("v {!r} {!r} {!r}\n".format(*map(float, p)))
            for f in mesh.faces + 1:
                fh.write("f {} {} {}\n".format(*f))
        else:
            fh.write(f"OFF\n{mesh.n} {mesh.num_faces} {len(mesh.edges)}\n")
            for p in mesh.vertices:
                fh.write("{!r} {!r} {!r}\n".format(*map(float, p)))
            for f in mesh.faces:
                fh.write("3 {} {} {}\n".format(*f))


def mesh_to_graph(mesh: TriMesh) -> WeightedGraph:
    """Edge graph of the mesh weighted by Euclidean edge length."""
    e = mesh.edges
    if len(e) == 0:
        return WeightedGraph.from_edges(mesh.n, [])
    w = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    return WeightedGraph.from_arrays(mesh.n, e[:, 0], e[:, 1], w)
