"""Spectral approximation of geodesic and graph distances.

A truncated Laplacian eigenbasis is computed once per shape; each distance
query then costs O(k^2) in the sublinear mode, independent of the vertex count.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, DomainError, FormatError, RankDeficiencyError, SpectroMeterError
from .graph_core import (
    DegenerateFaceWarning,
    SourceSet,
    TriMesh,
    WeightedGraph,
    load_graph_edgelist,
    load_mesh,
    mesh_to_graph,
    save_graph_edgelist,
    save_mesh,
)
from .maps import DistanceMap
from .metrics import ErrorReport, compare, kendall_tau
from .operators import (
    GradientOperator,
    build_gradient,
    cotangent_laplacian,
    random_walk_laplacian,
    unnormalized_laplacian,
)
from .oracles import OracleKind, brute_force, dijkstra, fast_marching, run_oracle
from .pipeline import (
    SpectroMeter,
    distance,
    engine_for,
    fit_coefficients,
    heat_kernel,
    project,
    random_walk_kernel,
    select_time,
    set_constant_offset,
    synthesize,
)
from .sampler import FarthestPointSampler, SampleSet, farthest_point_sample, grow_to_full_rank
from .spectral import SpectralBasis, compute_basis, load_basis, save_basis

__all__ = [
    "__version__",
    "ConvergenceError", "DomainError", "FormatError", "RankDeficiencyError", "SpectroMeterError",
    "DegenerateFaceWarning", "SourceSet", "TriMesh", "WeightedGraph",
    "load_graph_edgelist", "load_mesh", "mesh_to_graph", "save_graph_edgelist", "save_mesh",
    "DistanceMap", "ErrorReport", "compare", "kendall_tau",
    "GradientOperator", "build_gradient", "cotangent_laplacian", "random_walk_laplacian", "unnormalized_laplacian",
    "OracleKind", "brute_force", "dijkstra", "fast_marching", "run_oracle",
    "SpectroMeter", "distance", "engine_for", "fit_coefficients", "heat_kernel", "project", "random_walk_kernel",
    "select_time", "set_constant_offset", "synthesize",
    "FarthestPointSampler", "SampleSet", "farthest_point_sample", "grow_to_full_rank",
    "SpectralBasis", "compute_basis", "load_basis", "save_basis",
]
