"""Farthest point sampling of the vertex subset used by sublinear queries."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RankDeficiencyError
from .graph_core import SourceSet, TriMesh, WeightedGraph, mesh_to_graph
from .oracles import OracleKind, _dijkstra_values, _FMMGeometry, brute_force, fast_marching

__all__ = [
    "SampleSet",
    "FarthestPointSampler",
    "farthest_point_sample",
    "retained_elements",
    "retained_rank",
    "grow_to_full_rank",
    "default_sample_count",
    "RANK_RTOL",
    "SAMPLE_FACTOR",
]

log = logging.getLogger(__name__)

RANK_RTOL = 1e-6
SAMPLE_FACTOR = 1.5


@dataclass(frozen=True)
class SampleSet:
    """Sampled vertices (selection order) and the gradient elements they retain.

    ``elements`` are face indices for mesh bases and edge indices for graph
    bases: every element incident to a sampled vertex.
    """

    vertices: tuple[int, ...]
    elements: tuple[int, ...]
    seed: int
    oracle: str
    cover_radii: tuple[float, ...] = field(default=(), compare=False)

    def __len__(self):
        return len(self.vertices)

    @property
    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.int64)

    @property
    def element_array(self) -> np.ndarray:
        return np.asarray(self.elements, dtype=np.int64)


def default_sample_count(k: int, factor: float = SAMPLE_FACTOR) -> int:
    return int(math.ceil(factor * k))


def retained_elements(domain, vertices, element_kind: str | None = None) -> np.ndarray:
    """Faces (mesh) or edges (graph) incident to any of ``vertices``, sorted."""
    vertices = np.asarray(vertices, dtype=np.int64)
    if element_kind is None:
        element_kind = "mesh" if isinstance(domain, TriMesh) else "graph"
    if element_kind == "mesh":
        inc = domain.vertex_faces[vertices]
        return np.unique(inc.indices).astype(np.int64)
    g = mesh_to_graph(domain) if isinstance(domain, TriMesh) else domain
    mark = np.zeros(g.n, dtype=bool)
    mark[vertices] = True
    return np.flatnonzero(mark[g.i] | mark[g.j]).astype(np.int64)


class FarthestPointSampler:
    """Greedy FPS that can be extended one vertex at a time.

    Keeps the running min-distance to the selected set; ties pick the lowest
    vertex index. Each added sample costs one pruned oracle run (the search
    stops where it cannot lower the running minimum).
    """

    def __init__(self, domain, seed: int = 0, oracle: str | OracleKind | None = None):
        if oracle is None:
            oracle = OracleKind.FMM if isinstance(domain, TriMesh) else OracleKind.DIJKSTRA
        self.oracle = OracleKind(oracle)
        self.domain = domain
        n = domain.n
        if not 0 <= seed < n:
            raise DomainError(f"seed vertex {seed} out of range (n={n})")
        self.seed = int(seed)
        if self.oracle is OracleKind.FMM:
            if not isinstance(domain, TriMesh):
                raise DomainError("fast marching requires a TriMesh")
            self._geo = _FMMGeometry(domain)
        else:
            self._graph = mesh_to_graph(domain) if isinstance(domain, TriMesh) else domain
        self.selected: list[int] = []
        self.cover_radii: list[float] = []
        self.mindist = np.full(n, np.inf)
        self._add(self.seed)
        unreachable = np.flatnonzero(~np.isfinite(self.mindist))
        if len(unreachable):
            shown = ", ".join(map(str, unreachable[:20])) + (" ..." if len(unreachable) > 20 else "")
            raise DomainError(f"{len(unreachable)} vertices unreachable from seed {seed}: {shown}")

    def _distances(self, v: int, bound) -> np.ndarray:
        if self.oracle is OracleKind.FMM:
            return fast_marching(self.domain, [v], geometry=self._geo).values
        if self.oracle is OracleKind.DIJKSTRA:
            return _dijkstra_values(self._graph, [v], bound)
        return brute_force(self._graph, v).values

    def _add(self, v: int) -> None:
        bound = self.mindist if self.selected else None
        d = self._distances(v, bound)
        np.minimum(self.mindist, d, out=self.mindist)
        self.mindist[v] = 0.0
        self.selected.append(int(v))
        self.cover_radii.append(float(self.mindist.max()))

    def extend(self, count: int) -> None:
        """Grow the selection to ``count`` vertices."""
        n = self.domain.n
        if count > n:
            raise DomainError(f"sample count {count} exceeds n={n}")
        while len(self.selected) < count:
            # argmax returns the lowest index among ties
            self._add(int(np.argmax(self.mindist)))

    def sample_set(self, element_kind: str | None = None) -> SampleSet:
        elems = retained_elements(self.domain, self.selected, element_kind)
        return SampleSet(
            vertices=tuple(self.selected),
            elements=tuple(elems.tolist()),
            seed=self.seed,
            oracle=self.oracle.value,
            cover_radii=tuple(self.cover_radii),
        )


def farthest_point_sample(domain, count: int, seed: int = 0, oracle=None, element_kind: str | None = None) -> SampleSet:
    """Select ``count`` vertices by greedy farthest point sampling from ``seed``."""
    if count < 1:
        raise DomainError("sample count must be positive")
    if count > domain.n:
        raise DomainError(f"sample count {count} exceeds n={domain.n}")
    fps = FarthestPointSampler(domain, seed, oracle)
    fps.extend(count)
    return fps.sample_set(element_kind)


def _rows(basis, elements) -> np.ndarray:
    elements = np.asarray(elements, dtype=np.int64)
    g = basis.group
    return (elements[:, None] * g + np.arange(g)[None, :]).ravel()


def retained_rank(basis, elements) -> tuple[int, float]:
    """Numerical rank and ``s_min / s_max`` of the retained non-constant gradient rows."""
    c = basis.num_constant
    sub = basis.grad_phis[_rows(basis, elements), c:]
    if sub.shape[1] == 0:
        return 0, 1.0
    if sub.shape[0] == 0:
        return 0, 0.0
    s = np.linalg.svd(sub, compute_uv=False)
    if s[0] == 0:
        return 0, 0.0
    rank = int(np.sum(s >= RANK_RTOL * s[0]))
    ratio = float(s[-1] / s[0]) if len(s) == sub.shape[1] else 0.0
    return rank, ratio


def grow_to_full_rank(basis, initial: SampleSet | FarthestPointSampler, domain=None) -> SampleSet:
    """Extend an FPS sample until its retained gradient rows have full column rank.

    ``initial`` may be a finished :class:`SampleSet` (``domain`` is then needed
    to resume FPS) or a live :class:`FarthestPointSampler`.
    """
    target = basis.k - basis.num_constant
    kind = basis.domain_kind
    if isinstance(initial, FarthestPointSampler):
        fps = initial
    else:
        rank, _ = retained_rank(basis, initial.elements)
        if rank >= target:
            return initial
        if domain is None:
            raise RankDeficiencyError(
                f"retained rank {rank} < {target}; pass the domain to continue sampling"
            )
        fps = FarthestPointSampler(domain, initial.seed, initial.oracle)
        fps.extend(len(initial))
    n = fps.domain.n
    while True:
        ss = fps.sample_set(kind)
        rank, _ = retained_rank(basis, ss.elements)
        if rank >= target:
            log.info("sample set full rank with %d vertices", len(ss))
            return ss
        if len(fps.selected) >= n:
            raise RankDeficiencyError(f"gradient operator rank-deficient: rank {rank} < {target} with all vertices")
        missing = target - rank
        fps.extend(min(n, len(fps.selected) + max(1, missing // 3)))
