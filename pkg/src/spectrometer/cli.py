"""Command-line entry point: ``spectrometer {precompute,distance,benchmark,sweep-time,sample}``.

Exit status is 0 on success, 1 on a numerical failure (eigensolver
convergence, rank deficiency) and 2 on a usage error (bad input, bad
index, bad parameter).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError, FormatError, RankDeficiencyError
from .harness import (
    BenchmarkConfig,
    precompute,
    resolve_input,
    resolve_operator,
    run_benchmark,
    sweep_time,
    write_sidecar,
)
from .pipeline import DEFAULT_M, engine_for
from .sampler import SAMPLE_FACTOR, FarthestPointSampler
from .spectral import DEFAULT_K, load_basis, save_basis

log = logging.getLogger("spectrometer")

DEFAULT_GRID = ",".join(f"{m:.3g}" for m in np.logspace(-3, -1, 11))


def _index_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--input", nargs="+", help="mesh (.off/.obj), edge list, or generator such as icosphere:4, "
                                              "torus:70x70, grid:33, knn:3000:5:7")
    p.add_argument("--operator", choices=["mesh", "unnorm", "rw"], help="default: mesh for meshes, rw for graphs")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="number of eigenpairs (default %(default)s)")
    p.add_argument("--m", type=float, default=DEFAULT_M, help="heat time multiplier (default %(default)s)")
    p.add_argument("--mode", choices=["full", "sublinear"], default="full")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for source selection and point clouds")
    p.add_argument("--fps-seed", type=int, default=0, help="first farthest-point sample vertex")
    p.add_argument("--oracle", choices=["dijkstra", "fmm", "brute_force"],
                   help="default: fmm on meshes, dijkstra on graphs")
    p.add_argument("--out", help="output path (file or directory, per command)")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectrometer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("precompute", parents=[common], help="eigenbasis + samples -> basis file")
    p.add_argument("--sample-factor", type=float, default=SAMPLE_FACTOR)

    p = sub.add_parser("distance", parents=[common], help="approximate distances from a basis file")
    p.add_argument("--basis", help="basis file from `precompute` (else computed from --input)")
    p.add_argument("--sources", type=_index_list, required=True)
    p.add_argument("--targets", default="all", help="'all' or comma-separated vertex indices")
    p.add_argument("--t", type=float, help="explicit diffusion time / walk steps")
    p.add_argument("--offset", choices=["nonnegative", "zero_at_source"], default="nonnegative")
    p.add_argument("--format", choices=["csv", "json"], help="default: from --out suffix, else csv")
    p.add_argument("--timing", action="store_true", help="report wall-clock per query stage")

    p = sub.add_parser("benchmark", parents=[common], help="oracle vs full vs sublinear error tables")
    p.add_argument("--source-frac", type=float, default=0.05, help="fraction of vertices used as sources")
    p.add_argument("--source-count", type=int)
    p.add_argument("--sources", type=_index_list)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--sample-factor", type=float, default=SAMPLE_FACTOR)
    p.add_argument("--basis-dir", help="reuse/store basis files here")

    p = sub.add_parser("sweep-time", parents=[common], help="error versus the time multiplier m")
    p.add_argument("--grid", type=_float_list, default=_float_list(DEFAULT_GRID))
    p.add_argument("--source-count", type=int, default=6)

    p = sub.add_parser("sample", parents=[common], help="farthest point sample indices")
    p.add_argument("--count", type=int, required=True)
    return parser


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "quiet"}
    cfg["version"] = __version__
    return cfg


def _single_input(args):
    if not args.input:
        raise DomainError("--input is required")
    if len(args.input) != 1:
        raise DomainError(f"{args.command} takes a single --input")
    return resolve_input(args.input[0], args.seed)


def cmd_precompute(args) -> int:
    domain = _single_input(args)
    operator = resolve_operator(domain, args.operator)
    if not args.out:
        raise DomainError("--out basis file is required")
    timings: dict = {}
    basis = precompute(domain, operator, args.k, args.sample_factor, args.fps_seed, args.oracle, timings)
    save_basis(basis, args.out)
    config = dict(_config(args), operator=operator, n=domain.n, timings=timings,
                  samples=len(basis.samples))
    write_sidecar(args.out, config)
    print(f"n={domain.n} k={basis.k} samples={len(basis.samples)} -> {args.out}")
    for key in ("eigendecomposition_s", "gradients_s", "fps_s", "factorization_s"):
        print(f"  {key[:-2]:<18} {timings.get(key, 0.0):9.3f} s")
    return 0


def _targets(text: str, n: int):
    if text == "all":
        return None
    idx = _index_list(text)
    bad = [v for v in idx if not 0 <= v < n]
    if bad:
        raise DomainError(f"target index {bad[0]} out of range (n={n})")
    return idx


def cmd_distance(args) -> int:
    if args.basis:
        basis = load_basis(args.basis)
    else:
        domain = _single_input(args)
        log.info("no --basis given; precomputing from %s", args.input[0])
        basis = precompute(domain, resolve_operator(domain, args.operator), args.k, fps_seed=args.fps_seed)
    n = basis.n
    bad = [s for s in args.sources if not 0 <= s < n]
    if bad:
        raise DomainError(f"source index {bad[0]} out of range (n={n})")
    targets = _targets(args.targets, n)
    engine = engine_for(basis)
    engine.solver(args.mode)  # factorization is precompute, not query time
    tic = time.perf_counter()
    d = engine.distance(args.sources, args.mode, targets, args.t, args.m, args.offset, timing=args.timing)
    query_ms = 1e3 * (time.perf_counter() - tic)
    verts = np.arange(n) if d.vertices is None else np.asarray(d.vertices)
    fmt = args.format or ("json" if args.out and args.out.endswith(".json") else "csv")
    config = dict(_config(args), params={k: v for k, v in d.params.items() if k != "timing"})
    if fmt == "json":
        payload = {"config": config, "vertices": verts.tolist(), "distances": d.values.tolist()}
        if args.timing:
            payload["timing"] = dict(d.params["timing"], query_ms=query_ms)
        text = json.dumps(payload, indent=2)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vertex", "distance"])
        for v, x in zip(verts, d.values):
            w.writerow([int(v), repr(float(x))])
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
        if fmt == "csv":
            write_sidecar(args.out, config)
    else:
        sys.stdout.write(text)
    if args.timing:
        stages = " ".join(f"{k.removesuffix('_s')}={1e3 * v:.3f}ms" for k, v in d.params["timing"].items())
        print(f"query {query_ms:.3f} ms ({stages})", file=sys.stderr)
    return 0


def cmd_benchmark(args) -> int:
    if not args.input:
        raise DomainError("--input is required")
    cfg = BenchmarkConfig(
        inputs=list(args.input), operator=args.operator, k=args.k, m=args.m, sample_factor=args.sample_factor,
        source_frac=args.source_frac, source_count=args.source_count, sources=args.sources, seed=args.seed,
        fps_seed=args.fps_seed, oracle=args.oracle, out=args.out, repetitions=args.repetitions,
        basis_dir=args.basis_dir,
    )
    print(f"seed={cfg.seed} source_frac={cfg.source_frac:g}", file=sys.stderr)
    report = run_benchmark(cfg)
    print(f"{'input':<16} {'method':<10} {'n':>7} {'k':>4} {'rel%':>7} {'l2%':>6} {'linf%':>6} {'ms':>9}")
    for r in report["rows"]:
        print(f"{r['input']:<16} {r['method']:<10} {r['n']:>7} {r['k']:>4} {r['relative']:7.2f} "
              f"{r['l2']:6.2f} {r['linf']:6.2f} {r['runtime_ms']:9.1f}")
    if not args.out:
        json.dump({k: v for k, v in report.items()}, sys.stdout, indent=2)
        print()
    return 0


def cmd_sweep_time(args) -> int:
    domain = _single_input(args)
    operator = resolve_operator(domain, args.operator)
    rows = sweep_time(domain, args.grid, args.k, seed=args.seed, source_count=args.source_count,
                      mode=args.mode, oracle=args.oracle, operator=operator)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["m", "mean_l2", "mean_relative"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
        write_sidecar(args.out, _config(args))
    else:
        sys.stdout.write(buf.getvalue())
    best = min(rows, key=lambda r: r["mean_l2"])
    print(f"argmin m={best['m']:.4g} (mean l2 {best['mean_l2']:.3f}%)", file=sys.stderr)
    return 0


def cmd_sample(args) -> int:
    domain = _single_input(args)
    if args.count < 1:
        raise DomainError("count must be >= 1")
    if args.count > domain.n:
        raise DomainError(f"sample count {args.count} exceeds n={domain.n}")
    fps = FarthestPointSampler(domain, args.fps_seed, args.oracle)
    fps.extend(args.count)
    text = "".join(f"{v}\n" for v in fps.selected)
    if args.out:
        Path(args.out).write_text(text)
        write_sidecar(args.out, dict(_config(args), oracle=fps.oracle.value, cover_radii=fps.cover_radii))
    else:
        sys.stdout.write(text)
    for i, (v, r) in enumerate(zip(fps.selected, fps.cover_radii)):
        print(f"sample {i}: vertex {v} cover radius {r:.6g}", file=sys.stderr)
    return 0


def _configure_logging(quiet: bool) -> None:
    for h in [h for h in log.handlers if getattr(h, "_spectrometer", False)]:
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._spectrometer = True
    log.addHandler(handler)
    log.setLevel(logging.WARNING if quiet else logging.INFO)
    log.propagate = False


COMMANDS = {
    "precompute": cmd_precompute,
    "distance": cmd_distance,
    "benchmark": cmd_benchmark,
    "sweep-time": cmd_sweep_time,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.quiet)
    try:
        return COMMANDS[args.command](args)
    except (ConvergenceError, RankDeficiencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
