"""Spectral distance synthesis: heat / random-walk kernel, unit gradients, least-squares fit.

A query runs five stages against a precomputed :class:`SpectralBasis`:

1. kernel coefficients ``c`` from the source rows of ``Phi``,
2. kernel gradient ``grad_Phi @ c`` on the retained elements, normalized
   per element,
3. least-squares coefficients ``a`` with ``grad_Phi a ~ g_hat`` (non-constant
   modes only), through a QR factorization cached per basis,
4. constant-mode offset,
5. ``d = Phi a`` at the requested vertices.

``full`` mode uses every face/edge; ``sublinear`` only those incident to the
basis sample set, so a single-pair query costs O(k^2) independent of ``n``.
"""

from __future__ import annotations

import time
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DomainError, RankDeficiencyError
from .graph_core import SourceSet
from .maps import DistanceMap
from .operators import GradientOperator
from .sampler import RANK_RTOL, SampleSet
from .spectral import SpectralBasis

__all__ = [
    "DEFAULT_M",
    "GRADIENT_FLOOR",
    "KernelField",
    "UnitGradient",
    "CoefficientVector",
    "LeastSquaresFit",
    "SpectroMeter",
    "heat_kernel",
    "random_walk_kernel",
    "kernel_gradient",
    "normalize_gradient",
    "normalized_gradient",
    "fit_coefficients",
    "set_constant_offset",
    "synthesize",
    "select_time",
    "default_walk_steps",
    "project",
    "distance",
]

DEFAULT_M = 8e-3
GRADIENT_FLOOR = 1e-12
MAX_WALK_STEPS = 500


@dataclass(frozen=True, eq=False)
class KernelField:
    """Kernel values at ``eval`` (all vertices when ``None``).

    ``coeffs`` are the spectral coefficients: ``values == phis[eval] @ coeffs``.
    """

    values: np.ndarray
    coeffs: np.ndarray
    t: float
    sources: SourceSet
    kind: str
    eval: np.ndarray | None = None
    mass: np.ndarray | None = field(default=None, repr=False)

    def arrival_probability(self) -> np.ndarray:
        """Random-walk kernel times the degree of the arrival vertex, i.e. ``P^t[x_s, y]``."""
        if self.kind != "random_walk":
            raise DomainError("arrival probability is defined for the random-walk kernel only")
        deg = self.mass if self.eval is None else self.mass[self.eval]
        return self.values * deg


@dataclass(frozen=True, eq=False)
class UnitGradient:
    """Per-element unit gradients, stacked ``group`` rows per element.

    ``valid[e]`` is False where the raw gradient fell below the floor; those
    rows are zero and excluded from the fit.
    """

    rows: np.ndarray
    valid: np.ndarray
    group: int
    elements: np.ndarray | None = None

    @property
    def vectors(self) -> np.ndarray:
        return self.rows.reshape(-1, self.group)


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    a: np.ndarray
    residual: float

    def __len__(self):
        return len(self.a)


def _source_rows(basis: SpectralBasis, sources) -> np.ndarray:
    src = SourceSet.of(sources, basis.n)
    return basis.phis[src.array].mean(axis=0), src


def _evaluate(basis, coeffs, eval):
    if eval is None:
        return basis.phis @ coeffs
    return basis.phis[np.asarray(eval, dtype=np.int64)] @ coeffs


def _resolve_eval(basis, eval):
    if eval is None or (isinstance(eval, str) and eval == "all"):
        return None
    if isinstance(eval, SampleSet):
        return eval.vertex_array
    idx = np.asarray(eval, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= basis.n):
        raise DomainError(f"evaluation index out of range (n={basis.n})")
    return idx


def heat_kernel(basis: SpectralBasis, sources, t: float, eval=None) -> KernelField:
    """Scale-normalized truncated heat kernel averaged over ``sources``.

    ``h(y) = tr(M) * sum_i exp(-lambda_i t) phi_i(y) mean_s phi_i(x_s)``. With
    ``t = m * tr(M)`` (see :func:`select_time`) the kernel is invariant to a
    uniform rescaling of the mesh.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if basis.operator == "random_walk":
        raise DomainError("wrong operator kind: heat kernel needs a mesh or unnormalized basis")
    phi_src, src = _source_rows(basis, sources)
    coeffs = basis.mass_trace * np.exp(-basis.lambdas * t) * phi_src
    eval = _resolve_eval(basis, eval)
    return KernelField(_evaluate(basis, coeffs, eval), coeffs, float(t), src, "heat", eval, basis.mass)


def random_walk_kernel(basis: SpectralBasis, sources, t: int, eval=None) -> KernelField:
    """Truncated ``t``-step random-walk kernel ``sum_i (1 - lambda_i)^t phi_i(x_s) phi_i(y)``.

    ``phi_i`` are right eigenvectors of ``I - A^{-1} W`` (degree-orthonormal),
    so with the full basis this equals ``P^t[x_s, y] / deg(y)``.
    """
    if basis.operator != "random_walk":
        raise DomainError("wrong operator kind: random-walk kernel needs a random_walk basis")
    if int(t) != t or t < 0:
        raise DomainError("t must be a nonnegative integer")
    phi_src, src = _source_rows(basis, sources)
    coeffs = (1.0 - basis.lambdas) ** int(t) * phi_src
    eval = _resolve_eval(basis, eval)
    return KernelField(_evaluate(basis, coeffs, eval), coeffs, float(t), src, "random_walk", eval, basis.mass)


def select_time(basis: SpectralBasis, m: float = DEFAULT_M) -> float:
    """Diffusion time ``t = m * tr(M)`` for a mesh basis."""
    if basis.domain_kind != "mesh":
        raise DomainError("time selection by area multiplier needs a mesh basis")
    if not m > 0:
        raise DomainError("t must be positive (multiplier m must be > 0)")
    return m * basis.mass_trace


def default_walk_steps(basis: SpectralBasis) -> int:
    """``round(1 / lambda)`` of the first non-constant random-walk eigenvalue, clamped to [1, 500]."""
    c = basis.num_constant
    if c >= basis.k or basis.lambdas[c] <= 0:
        return 1
    return int(np.clip(round(1.0 / basis.lambdas[c]), 1, MAX_WALK_STEPS))


def _element_rows(group: int, elements) -> np.ndarray:
    elements = np.asarray(elements, dtype=np.int64)
    return (elements[:, None] * group + np.arange(group)[None, :]).ravel()


def kernel_gradient(basis: SpectralBasis, field: KernelField, elements=None) -> np.ndarray:
    """Raw kernel gradient on ``elements`` (all when ``None``), computed as ``grad_Phi @ coeffs``."""
    if elements is None:
        return basis.grad_phis @ field.coeffs
    return basis.grad_phis[_element_rows(basis.group, elements)] @ field.coeffs


def normalize_gradient(raw: np.ndarray, group: int, elements=None, floor: float = GRADIENT_FLOOR) -> UnitGradient:
    """Scale each element's gradient to unit length.

    Mesh elements are 3-vectors; graph elements are scalars and become
    ``+-1``. Elements with norm below ``floor * max norm`` are zeroed and
    marked invalid.
    """
    vec = np.asarray(raw, dtype=float).reshape(-1, group)
    nrm = np.linalg.norm(vec, axis=1)
    top = nrm.max() if len(nrm) else 0.0
    valid = nrm > floor * top if top > 0 else np.zeros(len(nrm), dtype=bool)
    out = np.zeros_like(vec)
    out[valid] = vec[valid] / nrm[valid, None]
    return UnitGradient(out.ravel(), valid, group, None if elements is None else np.asarray(elements))


def normalized_gradient(gradop: GradientOperator, field: KernelField, elements=None) -> UnitGradient:
    """Unit gradient of a kernel field through the explicit gradient operator.

    ``field`` must cover every vertex of the requested elements: either all
    vertices, or an ``eval`` set that includes them.
    """
    G = gradop.matrix if elements is None else gradop.matrix[gradop.rows_of(elements)]
    if field.eval is None:
        raw = G @ field.values
    else:
        full = np.full(G.shape[1], np.nan)
        full[field.eval] = field.values
        needed = np.unique(G.indices)
        if np.isnan(full[needed]).any():
            raise DomainError("kernel field not evaluated on all vertices of the retained elements")
        full[np.isnan(full)] = 0.0
        raw = G @ full
    return normalize_gradient(raw, gradop.group, elements)


class LeastSquaresFit:
    """Cached pivoted-QR factorization of the (weighted) retained ``grad_Phi`` rows.

    The factorization is computed once; each solve is a projection plus a
    triangular back-substitution, O(rows * k).
    """

    def __init__(self, basis: SpectralBasis, elements=None, weighted: bool = True):
        self.basis = basis
        self.c = basis.num_constant
        self.elements = None if elements is None else np.asarray(elements, dtype=np.int64)
        if self.elements is None:
            rows = slice(None)
            ew = basis.element_weights
        else:
            rows = _element_rows(basis.group, self.elements)
            ew = basis.element_weights[self.elements]
        self.row_weights = np.repeat(np.sqrt(ew) if weighted else np.ones(len(ew)), basis.group)
        self.weighted = weighted
        A = basis.grad_phis[rows, self.c :] * self.row_weights[:, None]
        self.A = A
        if A.shape[1] == 0:
            self.Q = np.zeros((A.shape[0], 0))
            self.R = np.zeros((0, 0))
            self.perm = np.zeros(0, dtype=np.int64)
            return
        if A.shape[0] < A.shape[1]:
            raise RankDeficiencyError(
                f"{A.shape[0]} gradient rows cannot determine {A.shape[1]} coefficients; grow the sample set"
            )
        Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        if d[0] == 0 or d[-1] < RANK_RTOL * d[0]:
            rank = int(np.sum(d >= RANK_RTOL * d[0])) if d[0] > 0 else 0
            raise RankDeficiencyError(
                f"retained gradient rows have rank {rank} < {A.shape[1]}; grow the sample set"
            )
        self.Q, self.R, self.perm = Q, R, perm

    def solve(self, ghat: UnitGradient) -> CoefficientVector:
        k = self.basis.k
        b = ghat.rows * self.row_weights
        a = np.zeros(k)
        if self.A.shape[1] == 0:
            return CoefficientVector(a, float(np.linalg.norm(b)))
        if ghat.valid.all():
            y = self.Q.T @ b
            x = scipy.linalg.solve_triangular(self.R, y, check_finite=False)
            a[self.c + self.perm] = x
            # explicit difference; sqrt(|b|^2 - |y|^2) cancels catastrophically near exact fits
            residual = float(np.linalg.norm(b - self.Q @ y))
            return CoefficientVector(a, residual)
        keep = np.repeat(ghat.valid, ghat.group)
        Ak = self.A[keep]
        if Ak.shape[0] < Ak.shape[1] or np.linalg.matrix_rank(Ak, tol=None) < Ak.shape[1]:
            raise RankDeficiencyError("gradient rows rank-deficient after excluding degenerate rows; grow the sample set")
        x, *_ = np.linalg.lstsq(Ak, b[keep], rcond=None)
        a[self.c :] = x
        residual = float(np.linalg.norm(b[keep] - Ak @ x))
        return CoefficientVector(a, residual)


def fit_coefficients(basis: SpectralBasis, ghat: UnitGradient, samples: SampleSet | str | None = None,
                     weighted: bool = True, solver: LeastSquaresFit | None = None) -> CoefficientVector:
    """Least-squares coefficients of the non-constant modes; constant entries stay 0.

    ``ghat`` must be aligned with the rows of ``samples.elements`` (or of all
    elements when ``samples`` is ``None`` / ``"all"``).
    """
    if solver is None:
        elements = None if samples is None or isinstance(samples, str) else samples.element_array
        solver = LeastSquaresFit(basis, elements, weighted)
    return solver.solve(ghat)


def set_constant_offset(basis: SpectralBasis, a: CoefficientVector, sources, mode: str = "nonnegative",
                        eval=None) -> CoefficientVector:
    """Choose the constant-mode coefficients.

    ``zero_at_source`` makes the mean synthesized value over the sources 0;
    ``nonnegative`` makes the minimum over ``eval`` (all vertices when
    ``None``) equal to 0. Only the constant-mode entries change.
    """
    c = basis.num_constant
    coef = a.a.copy()
    if c == 0:
        return CoefficientVector(coef, a.residual)
    coef[:c] = 0.0
    if mode == "zero_at_source":
        src = SourceSet.of(sources, basis.n)
        level = float(np.mean(basis.phis[src.array] @ coef))
    elif mode == "nonnegative":
        level = float(np.min(_evaluate(basis, coef, _resolve_eval(basis, eval))))
    else:
        raise ValueError(f"unknown offset mode {mode!r}")
    coef[:c] = -level * basis.constant_combination
    return CoefficientVector(coef, a.residual)


def synthesize(basis: SpectralBasis, a: CoefficientVector | np.ndarray, where=None, sources=None,
               method: str = "spectral", params: dict | None = None) -> DistanceMap:
    """``d(x) = Phi(x) a`` at ``where`` (all vertices when ``None``)."""
    coef = a.a if isinstance(a, CoefficientVector) else np.asarray(a, dtype=float)
    idx = _resolve_eval(basis, where)
    values = _evaluate(basis, coef, idx)
    src = SourceSet.of(sources, basis.n) if sources is not None else SourceSet((0,))
    return DistanceMap(values, src, method, dict(params or {}), idx)


def project(basis: SpectralBasis, values: np.ndarray) -> CoefficientVector:
    """Mass-inner-product projection of a full vertex function onto the basis."""
    values = np.asarray(values, dtype=float)
    if values.shape != (basis.n,):
        raise DomainError(f"expected {basis.n} values, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise DomainError("cannot project a map with non-finite entries")
    a = basis.phis.T @ (basis.mass * values)
    r = values - basis.phis @ a
    return CoefficientVector(a, float(np.sqrt(np.sum(basis.mass * r * r))))


class SpectroMeter:
    """Query engine over one basis; caches the full and sublinear factorizations.

    Safe to share between threads once both factorizations are built.
    """

    def __init__(self, basis: SpectralBasis, weighted: bool = True):
        self.basis = basis
        self.weighted = weighted
        self._solvers: dict[str, LeastSquaresFit] = {}

    def solver(self, mode: str) -> LeastSquaresFit:
        if mode not in self._solvers:
            if mode == "full":
                self._solvers[mode] = LeastSquaresFit(self.basis, None, self.weighted)
            elif mode == "sublinear":
                if self.basis.samples is None:
                    raise DomainError("sublinear mode needs a basis with a sample set")
                self._solvers[mode] = LeastSquaresFit(self.basis, self.basis.samples.element_array, self.weighted)
            else:
                raise ValueError(f"unknown mode {mode!r}")
        return self._solvers[mode]

    def kernel(self, sources, t=None, m: float = DEFAULT_M, eval=None) -> KernelField:
        b = self.basis
        if b.operator == "random_walk":
            return random_walk_kernel(b, sources, default_walk_steps(b) if t is None else t, eval)
        if t is None:
            t = select_time(b, m) if b.domain_kind == "mesh" else 1.0 / max(b.lambdas[b.num_constant], 1e-300)
        return heat_kernel(b, sources, t, eval)

    def coefficients(self, sources, mode: str = "full", t=None, m: float = DEFAULT_M,
                     offset: str = "nonnegative", gradop: GradientOperator | None = None,
                     clock: dict | None = None) -> tuple[CoefficientVector, KernelField]:
        b = self.basis
        tic = time.perf_counter()
        solver = self.solver(mode)
        elements = solver.elements
        if gradop is None:
            field = self.kernel(sources, t, m, eval=[])
            # heat decreases away from the sources; distance increases
            raw = -kernel_gradient(b, field, elements)
            ghat = normalize_gradient(raw, b.group, elements)
        else:
            if elements is None:
                eval = None
            else:
                eval = np.unique(gradop.matrix[gradop.rows_of(elements)].indices)
            field = self.kernel(sources, t, m, eval=eval)
            ghat = normalized_gradient(gradop, field, elements)
            ghat = UnitGradient(-ghat.rows, ghat.valid, ghat.group, ghat.elements)
        t1 = time.perf_counter()
        a = solver.solve(ghat)
        t2 = time.perf_counter()
        if offset == "nonnegative" and elements is not None:
            offset_eval = np.union1d(b.samples.vertex_array, field.sources.array)
        else:
            offset_eval = None
        a = set_constant_offset(b, a, field.sources, offset, eval=offset_eval)
        t3 = time.perf_counter()
        if clock is not None:
            clock.update(kernel_gradient_s=t1 - tic, fit_s=t2 - t1, offset_s=t3 - t2)
        return a, field

    def distance(self, sources, mode: str = "full", targets=None, t=None, m: float = DEFAULT_M,
                 offset: str = "nonnegative", gradop: GradientOperator | None = None,
                 timing: bool = False) -> DistanceMap:
        """Approximate distances from ``sources`` to ``targets`` (all vertices when ``None``)."""
        clock: dict = {}
        tic = time.perf_counter()
        a, field = self.coefficients(sources, mode, t, m, offset, gradop, clock)
        t0 = time.perf_counter()
        idx = _resolve_eval(self.basis, targets)
        values = _evaluate(self.basis, a.a, idx)
        toc = time.perf_counter()
        params = {
            "k": self.basis.k,
            "t": field.t,
            "kernel": field.kind,
            "offset": offset,
            "weighted": self.weighted,
            "residual": a.residual,
        }
        if mode == "sublinear":
            params["samples"] = len(self.basis.samples)
        if timing:
            clock.update(synthesize_s=toc - t0, total_s=toc - tic)
            params["timing"] = clock
        return DistanceMap(values, field.sources, mode, params, idx)


_ENGINES: "weakref.WeakKeyDictionary[SpectralBasis, dict[bool, SpectroMeter]]" = weakref.WeakKeyDictionary()


def engine_for(basis: SpectralBasis, weighted: bool = True) -> SpectroMeter:
    per = _ENGINES.setdefault(basis, {})
    if weighted not in per:
        per[weighted] = SpectroMeter(basis, weighted)
    return per[weighted]


def distance(basis: SpectralBasis, sources, mode: str = "full", gradop: GradientOperator | None = None,
             targets=None, t=None, m: float = DEFAULT_M, offset: str = "nonnegative",
             weighted: bool = True, timing: bool = False) -> DistanceMap:
    """Kernel, unit gradient, fit, offset and synthesis in one call.

    Factorizations are cached per basis, so repeated calls amortize the
    O(rows * k^2) setup.
    """
    return engine_for(basis, weighted).distance(sources, mode, targets, t, m, offset, gradop, timing)
