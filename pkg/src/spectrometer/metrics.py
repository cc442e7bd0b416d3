"""Error statistics of a distance map against a reference map."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .maps import DistanceMap

__all__ = ["ErrorReport", "compare", "kendall_tau", "kendall_tau_pairs", "RELATIVE_EPS", "mean_report"]

# fraction of the diameter added to the reference in the relative error
RELATIVE_EPS = 1e-3


@dataclass(frozen=True)
class ErrorReport:
    """Percentages of the diameter (``l2``, ``linf``) and mean relative error in percent."""

    relative_mean: float
    l2: float
    linf: float
    n_compared: int
    excluded: int
    kendall_tau: float | None = None

    def to_dict(self, **extra) -> dict:
        out = {"relative": self.relative_mean, "l2": self.l2, "linf": self.linf, "tau": self.kendall_tau,
               "n": self.n_compared, "excluded": self.excluded}
        out.update(extra)
        return out

    def to_json(self, **extra) -> str:
        return json.dumps(self.to_dict(**extra))


def _values(d) -> np.ndarray:
    return np.asarray(d.values if isinstance(d, DistanceMap) else d, dtype=float)


def compare(d, ref, diameter: float, tau: bool = False) -> ErrorReport:
    """Errors of ``d`` against ``ref`` normalized by ``diameter``.

    Entries that are non-finite in either map are excluded and counted.
    """
    x, r = _values(d), _values(ref)
    if x.shape != r.shape:
        raise DomainError(f"length mismatch: {x.shape} vs {r.shape}")
    if not diameter > 0:
        raise DomainError("diameter must be positive")
    ok = np.isfinite(x) & np.isfinite(r)
    x, r = x[ok], r[ok]
    n = len(x)
    if n == 0:
        return ErrorReport(0.0, 0.0, 0.0, 0, int((~ok).sum()))
    err = np.abs(x - r)
    eps = RELATIVE_EPS * diameter
    return ErrorReport(
        relative_mean=float(100.0 * np.mean(err / (r + eps))),
        l2=float(100.0 * np.linalg.norm(err) / (np.sqrt(n) * diameter)),
        linf=float(100.0 * err.max() / diameter),
        n_compared=n,
        excluded=int((~ok).sum()),
        kendall_tau=kendall_tau(x, r) if tau else None,
    )


def _strict_ranks(v: np.ndarray) -> np.ndarray:
    # ties broken by vertex index
    order = np.lexsort((np.arange(len(v)), v))
    ranks = np.empty(len(v), dtype=np.int64)
    ranks[order] = np.arange(len(v))
    return ranks


def _count_inversions(a: np.ndarray) -> int:
    """Inversions of an integer sequence by bottom-up merge sort."""
    a = np.asarray(a, dtype=np.int64).copy()
    n = len(a)
    inv = 0
    width = 1
    buf = np.empty_like(a)
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            if mid >= hi:
                buf[lo:hi] = a[lo:hi]
                continue
            left, right = a[lo:mid], a[mid:hi]
            # for each right element, how many left elements exceed it
            pos = np.searchsorted(left, right, side="right")
            inv += int(np.sum(len(left) - pos))
            buf[lo:hi] = np.sort(a[lo:hi], kind="mergesort")
        a, buf = buf, a
        width *= 2
    return inv


def kendall_tau(d, ref) -> float:
    """Fraction of discordant vertex pairs between the orderings of ``d`` and ``ref``.

    0 for identical orderings, 1 for reversed. O(n log n).
    """
    x, r = _values(d), _values(ref)
    if x.shape != r.shape:
        raise DomainError(f"length mismatch: {x.shape} vs {r.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
        raise DomainError("Kendall tau needs finite maps")
    n = len(x)
    if n < 2:
        return 0.0
    rx, rr = _strict_ranks(x), _strict_ranks(r)
    seq = np.empty(n, dtype=np.int64)
    seq[rr] = rx
    return _count_inversions(seq) / (n * (n - 1) / 2)


def kendall_tau_pairs(d, ref) -> float:
    """Quadratic pair enumeration, same tie rule as :func:`kendall_tau`."""
    rx, rr = _strict_ranks(_values(d)), _strict_ranks(_values(ref))
    n = len(rx)
    if n < 2:
        return 0.0
    disc = 0
    for a in range(n):
        for b in range(a + 1, n):
            if (rx[a] - rx[b]) * (rr[a] - rr[b]) < 0:
                disc += 1
    return disc / (n * (n - 1) / 2)


def mean_report(reports: list[ErrorReport]) -> ErrorReport:
    """Field-wise mean of several reports (counts are summed)."""
    if not reports:
        raise ValueError("no reports to average")
    taus = [r.kendall_tau for r in reports if r.kendall_tau is not None]
    return ErrorReport(
        relative_mean=float(np.mean([r.relative_mean for r in reports])),
        l2=float(np.mean([r.l2 for r in reports])),
        linf=float(np.mean([r.linf for r in reports])),
        n_compared=int(sum(r.n_compared for r in reports)),
        excluded=int(sum(r.excluded for r in reports)),
        kendall_tau=float(np.mean(taus)) if taus else None,
    )
