"""Reference distance solvers: Dijkstra, fast marching on triangle meshes, and path enumeration."""

from __future__ import annotations

import heapq
import logging
import math
from enum import Enum

import numpy as np

from .errors import DomainError
from .graph_core import SourceSet, TriMesh, WeightedGraph, mesh_to_graph
from .maps import DistanceMap

__all__ = ["OracleKind", "dijkstra", "fast_marching", "brute_force", "BRUTE_FORCE_MAX_N", "run_oracle"]

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 12


class OracleKind(str, Enum):
    DIJKSTRA = "dijkstra"
    FMM = "fmm"
    BRUTE_FORCE = "brute_force"


def _dijkstra_values(g: WeightedGraph, sources, bound=None) -> np.ndarray:
    adj = g.adjacency
    indptr, indices, data = adj.indptr, adj.indices, adj.data
    dist = np.full(g.n, np.inf)
    done = np.zeros(g.n, dtype=bool)
    heap = []
    for s in sources:
        dist[s] = 0.0
        heap.append((0.0, int(s)))
    heapq.heapify(heap)
    # (distance, vertex) tuples: ties pop the lower vertex index first
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            nd = d + data[p]
            if nd < dist[u] and (bound is None or nd < bound[u]):
                dist[u] = nd
                heapq.heappush(heap, (nd, int(u)))
    return dist


def dijkstra(g: WeightedGraph, sources, bound: np.ndarray | None = None) -> DistanceMap:
    """Exact multi-source shortest-path distances (``inf`` where unreachable).

    With ``bound`` the search does not expand past vertices whose tentative
    distance is not below ``bound``; those entries stay ``inf``. This is the
    pruning used by farthest point sampling.
    """
    src = SourceSet.of(sources, g.n)
    return DistanceMap(_dijkstra_values(g, src.indices, bound), src, OracleKind.DIJKSTRA.value)


class _FMMGeometry:
    """Per-mesh tables for the marching loop (pure Python scalars for speed)."""

    def __init__(self, mesh: TriMesh):
        v = mesh.vertices
        f = mesh.faces
        self.faces = [tuple(int(x) for x in row) for row in f]
        self.xyz = v.tolist()
        lens = np.linalg.norm(v[np.roll(f, -1, axis=1)] - v[np.roll(f, 1, axis=1)], axis=2)
        # lens[t][c] is the length of the edge opposite corner c
        self.opp = lens.tolist()
        self.vface: list[list[tuple[int, int]]] = [[] for _ in range(mesh.n)]
        for t, tri in enumerate(self.faces):
            for c, vert in enumerate(tri):
                self.vface[vert].append((t, c))


def _triangle_update(dA, dB, a, b, c):
    """Distance at C from known values at A and B.

    ``a = |BC|``, ``b = |AC|``, ``c = |AB|``. Unfolds the triangle into the
    plane with A=(0,0), B=(c,0), C above the x axis. A point-source front is
    reconstructed from a virtual source below AB when one exists; otherwise
    a plane wave with unit slope is fitted to (dA, dB). Returns ``None`` when
    the characteristic reaching C does not cross the edge AB.
    """
    xc = (b * b - a * a + c * c) / (2.0 * c)
    yc2 = b * b - xc * xc
    if yc2 <= 0.0:
        return None
    yc = math.sqrt(yc2)
    if dA + dB > c and abs(dA - dB) < c:
        xs = (dA * dA - dB * dB + c * c) / (2.0 * c)
        ys2 = dA * dA - xs * xs
        if ys2 > 0.0:
            ys = -math.sqrt(ys2)
            xi = xs + (xc - xs) * (-ys) / (yc - ys)
            if 0.0 <= xi <= c:
                return math.hypot(xc - xs, yc - ys)
            return None
    gx = (dB - dA) / c
    if abs(gx) >= 1.0:
        return None
    gy = math.sqrt(1.0 - gx * gx)
    xi = xc - gx * yc / gy
    if 0.0 <= xi <= c:
        return dA + gx * xc + gy * yc
    return None


def fast_marching(mesh: TriMesh, sources, geometry: _FMMGeometry | None = None) -> DistanceMap:
    """First-arrival distances on a triangle mesh.

    Each triangle update unfolds the face into the plane. When the front's
    characteristic misses the opposite edge (obtuse configurations) the vertex
    falls back to the Dijkstra-style edge update; the number of such
    fallbacks is reported in ``params["obtuse_fallbacks"]``. Vertices whose
    value later improves are re-opened, so the result never exceeds the
    edge-graph shortest path.
    """
    src = SourceSet.of(sources, mesh.n)
    geo = geometry or _FMMGeometry(mesh)
    faces, opp, vface = geo.faces, geo.opp, geo.vface
    n = mesh.n
    dist = [math.inf] * n
    done = [False] * n
    heap = [(0.0, s) for s in src.indices]
    for s in src.indices:
        dist[s] = 0.0
    heapq.heapify(heap)
    fallbacks = 0
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        done[v] = True
        for t, cv in vface[v]:
            tri = faces[t]
            lt = opp[t]
            for step in (1, 2):
                cu = (cv + step) % 3
                u = tri[cu]
                cw = 3 - cv - cu
                w = tri[cw]
                # |vu| is opposite corner w, |wu| opposite corner v, |vw| opposite u
                cand = d + lt[cw]
                tri_ok = False
                if done[w]:
                    upd = _triangle_update(d, dist[w], lt[cv], lt[cw], lt[cu])
                    if upd is not None:
                        tri_ok = True
                        if upd < cand:
                            cand = upd
                if cand < dist[u] * (1.0 - 1e-14) or (cand < dist[u] and not done[u]):
                    if done[w] and not tri_ok:
                        fallbacks += 1
                    dist[u] = cand
                    heapq.heappush(heap, (cand, u))
    if fallbacks:
        log.debug("fast marching: %d obtuse fallback updates", fallbacks)
    return DistanceMap(np.asarray(dist), src, OracleKind.FMM.value, {"obtuse_fallbacks": fallbacks})


def brute_force(g: WeightedGraph, source: int) -> DistanceMap:
    """Minimum over all simple paths from ``source`` (exponential; ``n <= 12``)."""
    if g.n > BRUTE_FORCE_MAX_N:
        raise DomainError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N} (got {g.n})")
    src = SourceSet.of([source], g.n)
    nbrs: list[list[tuple[int, float]]] = [[] for _ in range(g.n)]
    for a, b, w in g.edges:
        nbrs[a].append((b, w))
        nbrs[b].append((a, w))
    best = [math.inf] * g.n
    on_path = [False] * g.n

    def walk(v, length):
        if length < best[v]:
            best[v] = length
        on_path[v] = True
        for u, w in nbrs[v]:
            if not on_path[u]:
                walk(u, length + w)
        on_path[v] = False

    walk(src.indices[0], 0.0)
    return DistanceMap(np.asarray(best), src, OracleKind.BRUTE_FORCE.value)


def run_oracle(domain, sources, kind: str | OracleKind | None = None) -> DistanceMap:
    """Dispatch helper: FMM for meshes and Dijkstra for graphs unless ``kind`` says otherwise."""
    if kind is None:
        kind = OracleKind.FMM if isinstance(domain, TriMesh) else OracleKind.DIJKSTRA
    kind = OracleKind(kind)
    if kind is OracleKind.FMM:
        if not isinstance(domain, TriMesh):
            raise DomainError("fast marching requires a TriMesh")
        return fast_marching(domain, sources)
    g = mesh_to_graph(domain) if isinstance(domain, TriMesh) else domain
    if kind is OracleKind.DIJKSTRA:
        return dijkstra(g, sources)
    src = SourceSet.of(sources, g.n)
    if len(src) != 1:
        raise DomainError("brute force takes a single source")
    return brute_force(g, src.indices[0])
