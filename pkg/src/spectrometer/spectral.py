"""Truncated Laplacian eigenbasis, eigenfunction gradients, and the on-disk basis container."""

from __future__ import annotations

import logging
import struct
import time
import zlib
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .errors import ConvergenceError, DomainError, FormatError
from .graph_core import TriMesh, WeightedGraph, mesh_to_graph
from .operators import build_gradient, cotangent_laplacian, unnormalized_laplacian

if TYPE_CHECKING:
    from .sampler import SampleSet

__all__ = [
    "DEFAULT_K",
    "OPERATORS",
    "SpectralBasis",
    "compute_basis",
    "save_basis",
    "load_basis",
    "eigen_residuals",
]

log = logging.getLogger(__name__)

DEFAULT_K = 250
OPERATORS = ("mesh", "unnormalized", "random_walk")
RESIDUAL_TOL = 1e-8
ZERO_EIG_TOL = 1e-8
DENSE_LIMIT = 600


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """The precomputed, reusable part of a distance query.

    ``phis`` holds vertex-space eigenfunctions, orthonormal in the ``mass``
    inner product (lumped area for meshes, degree for the random-walk
    operator, identity for the unnormalized graph Laplacian). ``grad_phis``
    is the gradient-operator image of ``phis``; its rows are grouped
    ``group`` per element (3 per face, 1 per edge).
    """

    lambdas: np.ndarray
    phis: np.ndarray
    grad_phis: np.ndarray
    mass: np.ndarray
    element_weights: np.ndarray
    group: int
    mass_trace: float
    domain_kind: str
    operator: str
    num_constant: int
    samples: "SampleSet | None" = None

    @property
    def k(self) -> int:
        return len(self.lambdas)

    @property
    def n(self) -> int:
        return self.phis.shape[0]

    @property
    def num_elements(self) -> int:
        return self.grad_phis.shape[0] // self.group

    @cached_property
    def constant_combination(self) -> np.ndarray:
        """Coefficients ``b`` over the constant modes with ``Phi_c b ~ 1``."""
        c = self.num_constant
        if c == 0:
            return np.zeros(0)
        b, *_ = np.linalg.lstsq(self.phis[:, :c], np.ones(self.n), rcond=None)
        return b

    def with_samples(self, samples: "SampleSet | None") -> "SpectralBasis":
        return replace(self, samples=samples)

    def truncated(self, k: int) -> "SpectralBasis":
        """First ``k`` modes of this basis (samples dropped)."""
        if not 0 < k <= self.k:
            raise ValueError(f"k must be in [1, {self.k}]")
        return replace(
            self,
            lambdas=self.lambdas[:k],
            phis=self.phis[:, :k],
            grad_phis=self.grad_phis[:, :k],
            num_constant=min(self.num_constant, k),
            samples=None,
        )


def _sign_fix(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigen_residuals(L, M, lambdas, phis) -> np.ndarray:
    """``||L phi_i - lambda_i M phi_i||_2 / ||phi_i||_M`` per mode (``M`` a diagonal vector)."""
    r = L @ phis - (M[:, None] * phis) * lambdas[None, :]
    return np.linalg.norm(r, axis=0) / np.sqrt(np.einsum("i,ij,ij->j", M, phis, phis))


def _rayleigh_ritz(L, m, vecs):
    """Re-diagonalize on span(vecs); returns mass-orthonormal Ritz pairs."""
    A = vecs.T @ (L @ vecs)
    B = vecs.T @ (m[:, None] * vecs)
    A = (A + A.T) / 2
    B = (B + B.T) / 2
    w, q = scipy.linalg.eigh(A, B)
    return w, vecs @ q


def _smallest_eigenpairs(L: sparse.csr_matrix, m: np.ndarray, k: int):
    """Smallest ``k`` eigenpairs of ``L x = lambda diag(m) x`` (L symmetric PSD)."""
    n = L.shape[0]
    if n <= DENSE_LIMIT or k >= n - 1:
        w, v = scipy.linalg.eigh(L.toarray(), np.diag(m))
        w, v = w[:k], v[:, :k]
        return w, v, float(eigen_residuals(L, m, w, v).max())
    M = sparse.diags(m).tocsc()
    scale = float(np.max(L.diagonal() / m))
    sigma = -1e-6 * scale
    v0 = np.random.default_rng(0).standard_normal(n)
    maxiter = 50 * k
    best = None
    for ncv in (min(n - 1, max(2 * k + 1, k + 32)), min(n - 1, 3 * k + 1)):
        try:
            w, v = eigsh(L.tocsc(), k=k, M=M, sigma=sigma, which="LM", v0=v0, ncv=ncv, maxiter=maxiter, tol=1e-12)
        except (ArpackNoConvergence, ArpackError) as exc:
            log.warning("shift-invert Lanczos failed (ncv=%d): %s", ncv, exc)
            continue
        w, v = _rayleigh_ritz(L, m, v)
        res = float(eigen_residuals(L, m, w, v).max())
        if best is None or res < best[2]:
            best = (w, v, res)
        if res <= RESIDUAL_TOL:
            break
        log.warning("eigen residual %.3g above tolerance (ncv=%d), retrying", res, ncv)
    if best is None:
        raise ConvergenceError("eigensolver did not converge", residual=np.inf)
    return best


def compute_basis(domain: TriMesh | WeightedGraph, operator: str = "mesh", k: int = DEFAULT_K,
                  timings: dict | None = None) -> SpectralBasis:
    """Smallest ``k`` eigenpairs of the chosen Laplacian plus their gradients.

    ``operator`` is ``"mesh"`` (cotangent stiffness against lumped mass, meshes
    only), ``"unnormalized"`` (``A - W``) or ``"random_walk"``
    (``I - A^{-1} W`` solved through its symmetric similarity transform).
    Meshes passed with a graph operator use their edge-length graph.

    ``timings``, when given, receives ``eigendecomposition_s`` and ``gradients_s``.

    Raises
    ------
    ConvergenceError
        If the eigen residual stays above ``1e-8`` after retries.
    """
    if operator not in OPERATORS:
        raise ValueError(f"unknown operator {operator!r}; expected one of {OPERATORS}")
    n = domain.n
    if not 0 < k <= n:
        raise DomainError(f"k must be in [1, n={n}]")

    tic = time.perf_counter()
    if operator == "mesh":
        if not isinstance(domain, TriMesh):
            raise DomainError("mesh operator requires a TriMesh")
        L, M = cotangent_laplacian(domain)
        m = M.diagonal().copy()
        if np.any(m <= 0):
            raise DomainError("vertex with zero lumped area (unreferenced vertex?)")
        lambdas, phis, res = _smallest_eigenpairs(L, m, k)
        gradop = build_gradient(domain)
        mass_trace = float(m.sum())
        domain_kind = "mesh"
    else:
        g = mesh_to_graph(domain) if isinstance(domain, TriMesh) else domain
        L = unnormalized_laplacian(g)
        gradop = build_gradient(g)
        mass_trace = float(n)
        domain_kind = "graph"
        if operator == "unnormalized":
            m = np.ones(n)
            lambdas, phis, res = _smallest_eigenpairs(L, m, k)
        else:
            deg = g.degrees
            if np.any(deg <= 0):
                raise DomainError(f"zero degree at vertex {int(np.argmax(deg <= 0))}")
            s = 1.0 / np.sqrt(deg)
            Lsym = (sparse.diags(s) @ L @ sparse.diags(s)).tocsr()
            lambdas, psi, res = _smallest_eigenpairs(Lsym, np.ones(n), k)
            phis = s[:, None] * psi
            m = deg.copy()

    if res > RESIDUAL_TOL:
        raise ConvergenceError(f"eigen residual {res:.3g} exceeds {RESIDUAL_TOL:g}", residual=res)
    toc = time.perf_counter()
    order = np.argsort(lambdas, kind="stable")
    lambdas = np.maximum(lambdas[order], 0.0)
    phis = _sign_fix(phis[:, order])
    num_constant = int(np.sum(lambdas < ZERO_EIG_TOL * max(lambdas[-1], 1.0)))
    lambdas[:num_constant] = 0.0
    grad = np.asarray(gradop.matrix @ phis)
    grad[:, :num_constant] = 0.0
    if timings is not None:
        timings["eigendecomposition_s"] = toc - tic
        timings["gradients_s"] = time.perf_counter() - toc
    return SpectralBasis(
        lambdas=lambdas,
        phis=np.ascontiguousarray(phis),
        grad_phis=np.ascontiguousarray(grad),
        mass=m,
        element_weights=gradop.element_weights.copy(),
        group=gradop.group,
        mass_trace=mass_trace,
        domain_kind=domain_kind,
        operator=operator,
        num_constant=num_constant,
    )


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

MAGIC = b"SPECBAS\x00"
VERSION = 1
_HEADER = struct.Struct("<QQQIBBdIQQqB")
_DOMAIN_CODES = {"mesh": 0, "graph": 1}
_OPERATOR_CODES = {name: i for i, name in enumerate(OPERATORS)}
_ORACLE_CODES = {"": 0, "dijkstra": 1, "fmm": 2, "brute_force": 3}


def _inverse(d):
    return {v: k for k, v in d.items()}


def save_basis(basis: SpectralBasis, path) -> None:
    """Write the basis container (layout in ``docs/basis_format.md``)."""
    s = basis.samples
    sv = np.zeros(0, np.int64) if s is None else np.asarray(s.vertices, dtype="<i8")
    se = np.zeros(0, np.int64) if s is None else np.asarray(s.elements, dtype="<i8")
    header = _HEADER.pack(
        basis.n,
        basis.k,
        basis.grad_phis.shape[0],
        basis.group,
        _DOMAIN_CODES[basis.domain_kind],
        _OPERATOR_CODES[basis.operator],
        float(basis.mass_trace),
        basis.num_constant,
        len(sv) if s is not None else 0xFFFFFFFFFFFFFFFF,
        len(se),
        -1 if s is None else int(s.seed),
        _ORACLE_CODES[s.oracle] if s is not None else 0,
    )
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        header,
        np.asarray(basis.lambdas, "<f8").tobytes(),
        np.asarray(basis.mass, "<f8").tobytes(),
        np.asarray(basis.element_weights, "<f8").tobytes(),
        np.asarray(basis.phis, "<f8").tobytes(order="F"),
        np.asarray(basis.grad_phis, "<f8").tobytes(order="F"),
        sv.astype("<i8").tobytes(),
        se.astype("<i8").tobytes(),
    ]
    payload = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_basis(path) -> SpectralBasis:
    from .sampler import SampleSet

    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a basis file")
    off = len(MAGIC)
    if len(data) < off + 4 + _HEADER.size + 4:
        raise FormatError(f"{path}: truncated basis file")
    (version,) = struct.unpack_from("<I", data, off)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported basis version {version} (expected {VERSION})")
    off += 4
    (n, k, rows, group, dom, op, mass_trace, num_constant, n_sv, n_se, seed, oracle) = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    has_samples = n_sv != 0xFFFFFFFFFFFFFFFF
    n_sv = n_sv if has_samples else 0
    sizes = [k, n, rows // max(group, 1), n * k, rows * k]
    expected = off + 8 * (sum(sizes) + n_sv + n_se) + 4
    if len(data) != expected:
        raise FormatError(f"{path}: truncated basis file ({len(data)} bytes, expected {expected})")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise FormatError(f"{path}: checksum mismatch")

    def take(count, dtype="<f8"):
        nonlocal off
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off).copy()
        off += 8 * count
        return arr

    lambdas = take(k)
    mass = take(n)
    weights = take(rows // max(group, 1))
    phis = np.ascontiguousarray(take(n * k).reshape((n, k), order="F"))
    grad = np.ascontiguousarray(take(rows * k).reshape((rows, k), order="F"))
    samples = None
    if has_samples:
        sv = take(n_sv, "<i8")
        se = take(n_se, "<i8")
        samples = SampleSet(
            vertices=tuple(sv.tolist()),
            elements=tuple(se.tolist()),
            seed=int(seed),
            oracle=_inverse(_ORACLE_CODES)[oracle],
        )
    return SpectralBasis(
        lambdas=lambdas,
        phis=phis,
        grad_phis=grad,
        mass=mass,
        element_weights=weights,
        group=int(group),
        mass_trace=float(mass_trace),
        domain_kind=_inverse(_DOMAIN_CODES)[dom],
        operator=_inverse(_OPERATOR_CODES)[op],
        num_constant=int(num_constant),
        samples=samples,
    )
