"""Precompute / benchmark / time-sweep workflows shared by the CLI and the acceptance tests."""

from __future__ import annotations

import csv
import json
import logging
import re
import statistics
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError
from .graph_core import TriMesh, WeightedGraph, load_graph_edgelist, load_mesh
from .metrics import compare, mean_report
from .oracles import OracleKind, _FMMGeometry, dijkstra, fast_marching, mesh_to_graph
from .pipeline import DEFAULT_M, engine_for
from .sampler import FarthestPointSampler, default_sample_count, grow_to_full_rank, SAMPLE_FACTOR
from .shapes import from_spec, knn_graph
from .spectral import DEFAULT_K, SpectralBasis, compute_basis, load_basis, save_basis

__all__ = [
    "OPERATOR_ALIASES",
    "BenchmarkConfig",
    "resolve_input",
    "resolve_operator",
    "precompute",
    "select_sources",
    "oracle_maps",
    "run_benchmark",
    "sweep_time",
    "write_sidecar",
]

log = logging.getLogger(__name__)

OPERATOR_ALIASES = {"mesh": "mesh", "unnorm": "unnormalized", "unnormalized": "unnormalized",
                    "rw": "random_walk", "random_walk": "random_walk"}
_GENERATORS = ("icosphere", "ellipsoid", "torus", "grid")


@dataclass
class BenchmarkConfig:
    inputs: list[str]
    operator: str | None = None
    k: int = DEFAULT_K
    m: float = DEFAULT_M
    sample_factor: float = SAMPLE_FACTOR
    source_frac: float = 0.05
    source_count: int | None = None
    sources: list[int] | None = None
    seed: int = 0
    fps_seed: int = 0
    oracle: str | None = None
    out: str | None = None
    repetitions: int = 1
    basis_dir: str | None = None
    k_cap_frac: float = 1.0 / 3.0

    def __post_init__(self):
        if self.k < 2:
            raise DomainError("k must be >= 2")
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        if not 0 < self.source_frac <= 1:
            raise DomainError("source fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        return d


def resolve_input(spec: str, seed: int = 0) -> TriMesh | WeightedGraph:
    """Load a mesh/graph file or build a synthetic domain.

    Generators: ``icosphere:4``, ``ellipsoid:4``, ``torus:70x70``, ``grid:33``,
    and ``knn:<points>:<dim>:<neighbours>`` (uniform points in the unit cube,
    drawn with ``seed``).
    """
    name = spec.split(":", 1)[0]
    if name in _GENERATORS and ":" in spec:
        return from_spec(spec)
    if name == "knn":
        parts = spec.split(":")
        if len(parts) != 4:
            raise DomainError("knn generator is knn:<points>:<dim>:<neighbours>")
        npts, dim, nn = (int(x) for x in parts[1:])
        pts = np.random.default_rng(seed).uniform(size=(npts, dim))
        return knn_graph(pts, nn)
    path = Path(spec)
    if not path.exists():
        raise DomainError(f"input {spec!r} is neither a file nor a known generator")
    if path.suffix.lower() in (".off", ".obj"):
        return load_mesh(path)
    return load_graph_edgelist(path)


def resolve_operator(domain, operator: str | None) -> str:
    if operator is None:
        return "mesh" if isinstance(domain, TriMesh) else "random_walk"
    if operator not in OPERATOR_ALIASES:
        raise DomainError(f"unknown operator {operator!r}")
    op = OPERATOR_ALIASES[operator]
    if op == "mesh" and not isinstance(domain, TriMesh):
        raise DomainError("mesh operator requires a mesh input")
    return op


def precompute(domain, operator: str = "mesh", k: int = DEFAULT_K, sample_factor: float = SAMPLE_FACTOR,
               fps_seed: int = 0, oracle: str | None = None, timings: dict | None = None) -> SpectralBasis:
    """Eigenbasis, gradients, FPS sample grown to full rank, and the sublinear factorization."""
    if k >= domain.n:
        raise DomainError(f"k must be < n (k={k}, n={domain.n})")
    timings = {} if timings is None else timings
    basis = compute_basis(domain, operator, k, timings=timings)
    tic = time.perf_counter()
    fps = FarthestPointSampler(domain, fps_seed, oracle)
    fps.extend(min(domain.n, default_sample_count(k, sample_factor)))
    samples = grow_to_full_rank(basis, fps)
    timings["fps_s"] = time.perf_counter() - tic
    basis = basis.with_samples(samples)
    tic = time.perf_counter()
    engine_for(basis).solver("sublinear")
    timings["factorization_s"] = time.perf_counter() - tic
    return basis


def select_sources(n: int, seed: int, frac: float = 0.05, count: int | None = None) -> list[int]:
    """Sorted random source vertices from a PCG64 generator seeded with ``seed``."""
    if count is None:
        count = max(1, int(round(frac * n)))
    count = min(count, n)
    rng = np.random.default_rng(seed)
    return sorted(int(x) for x in rng.choice(n, size=count, replace=False))


def oracle_maps(domain, sources, kind: str | None = None) -> list[np.ndarray]:
    """One exact map per single source."""
    kind = OracleKind(kind) if kind else (OracleKind.FMM if isinstance(domain, TriMesh) else OracleKind.DIJKSTRA)
    if kind is OracleKind.FMM:
        geo = _FMMGeometry(domain)
        return [fast_marching(domain, [s], geometry=geo).values for s in sources]
    g = mesh_to_graph(domain) if isinstance(domain, TriMesh) else domain
    return [dijkstra(g, [s]).values for s in sources]


def _tag(spec: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", Path(spec).name if Path(spec).exists() else spec)


def write_sidecar(path, config: dict) -> None:
    Path(str(path) + ".json").write_text(json.dumps(config, indent=2, sort_keys=True))


def _timed(fn, repetitions: int):
    runs, out = [], None
    for _ in range(repetitions):
        tic = time.perf_counter()
        out = fn()
        runs.append(1e3 * (time.perf_counter() - tic))
    return out, min(runs), statistics.median(runs)


def _load_or_precompute(spec, domain, operator, k, cfg: BenchmarkConfig, timings: dict) -> SpectralBasis:
    path = None
    if cfg.basis_dir:
        path = Path(cfg.basis_dir) / f"{_tag(spec)}_{operator}_k{k}_s{cfg.fps_seed}.basis"
        if path.exists():
            log.info("loading basis %s", path)
            return load_basis(path)
        log.info("basis %s missing; precomputing", path)
    basis = precompute(domain, operator, k, cfg.sample_factor, cfg.fps_seed, cfg.oracle, timings)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_basis(basis, path)
    return basis


def run_benchmark(cfg: BenchmarkConfig) -> dict:
    """Oracle vs full vs sublinear on every input; returns the report dict.

    With ``cfg.out`` set, writes ``report.json``, ``scaling.csv`` and per-source
    map CSVs under ``maps/``, each CSV with a ``.json`` config sidecar.
    """
    out_dir = Path(cfg.out) if cfg.out else None
    if out_dir:
        (out_dir / "maps").mkdir(parents=True, exist_ok=True)
    config = cfg.to_dict()
    rows, scaling, precompute_log = [], [], []
    for spec in cfg.inputs:
        domain = resolve_input(spec, cfg.seed)
        operator = resolve_operator(domain, cfg.operator)
        n = domain.n
        k = min(cfg.k, max(2, int(n * cfg.k_cap_frac)), n - 1)
        if k != cfg.k:
            log.info("%s: k capped to %d (n=%d)", spec, k, n)
        timings: dict = {}
        tic = time.perf_counter()
        basis = _load_or_precompute(spec, domain, operator, k, cfg, timings)
        precompute_ms = 1e3 * (time.perf_counter() - tic)
        precompute_log.append(dict(timings, input=spec, n=n, k=k, total_ms=precompute_ms))
        sources = cfg.sources if cfg.sources else select_sources(n, cfg.seed, cfg.source_frac, cfg.source_count)
        if max(sources) >= n or min(sources) < 0:
            raise DomainError(f"source index out of range (n={n})")
        refs, o_min, o_med = _timed(lambda: oracle_maps(domain, sources, cfg.oracle), cfg.repetitions)
        finite = [r[np.isfinite(r)] for r in refs]
        diameter = float(max(r.max() for r in finite if len(r)))
        engine = engine_for(basis)
        engine.solver("full")
        results = {"oracle": (refs, o_min, o_med)}
        t_used = None
        for mode in ("full", "sublinear"):
            maps, r_min, r_med = _timed(
                lambda: [engine.distance([s], mode, m=cfg.m) for s in sources], cfg.repetitions
            )
            t_used = maps[0].params["t"]
            results[mode] = ([d.values for d in maps], r_min, r_med)
        for method, (maps, r_min, r_med) in results.items():
            if method != "oracle":
                rep = mean_report([compare(d, r, diameter) for d, r in zip(maps, refs)])
                rows.append(rep.to_dict(method=method, k=k, t=t_used, n=n, input=spec,
                                        runtime_ms=r_med, runtime_ms_min=r_min, sources=len(sources)))
            scaling.append({"input": spec, "n": n, "method": method, "runtime_ms_median": r_med,
                            "runtime_ms_min": r_min, "precompute_ms": 0.0 if method == "oracle" else precompute_ms})
        if out_dir:
            for idx, s in enumerate(sources):
                p = out_dir / "maps" / f"{_tag(spec)}_src{s}.csv"
                with open(p, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["vertex", "oracle", "full", "sublinear"])
                    for v in range(n):
                        w.writerow([v, repr(float(refs[idx][v])), repr(float(results["full"][0][idx][v])),
                                    repr(float(results["sublinear"][0][idx][v]))])
                write_sidecar(p, dict(config, input=spec, source=s, diameter=diameter))
        log.info("%s: n=%d k=%d diameter=%.4g, %d sources", spec, n, k, diameter, len(sources))
    report = {"config": config, "rows": rows, "precompute": precompute_log}
    if out_dir:
        (out_dir / "report.json").write_text(json.dumps(report, indent=2))
        with open(out_dir / "scaling.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(scaling[0]))
            w.writeheader()
            w.writerows(scaling)
        write_sidecar(out_dir / "scaling.csv", config)
    report["scaling"] = scaling
    return report


def sweep_time(domain, grid, k: int = DEFAULT_K, sources=None, seed: int = 0, source_count: int = 6,
               mode: str = "full", oracle: str | None = None, basis: SpectralBasis | None = None,
               operator: str = "mesh") -> list[dict]:
    """Mean l2 / relative error versus the time multiplier ``m`` for each grid value."""
    grid = [float(m) for m in grid]
    if not grid:
        raise DomainError("empty m grid")
    if any(not m > 0 for m in grid):
        raise DomainError("all multipliers m must be positive")
    if basis is None:
        if mode == "sublinear":
            basis = precompute(domain, operator, k)
        else:
            basis = compute_basis(domain, operator, k)
    if sources is None:
        sources = select_sources(domain.n, seed, count=source_count)
    refs = oracle_maps(domain, sources, oracle)
    diameter = float(max(r[np.isfinite(r)].max() for r in refs))
    engine = engine_for(basis)
    out = []
    for m in grid:
        reps = [compare(engine.distance([s], mode, m=m), r, diameter) for s, r in zip(sources, refs)]
        rep = mean_report(reps)
        out.append({"m": m, "mean_l2": rep.l2, "mean_relative": rep.relative_mean})
    return out
