from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph_core import SourceSet

__all__ = ["DistanceMap"]


@dataclass(frozen=True, eq=False)
class DistanceMap:
    """Distances from a source set, tagged with the method that produced them.

    ``vertices`` is ``None`` for a full map (``values[v]`` is vertex ``v``),
    otherwise the queried vertex indices aligned with ``values``.
    """

    values: np.ndarray
    sources: SourceSet
    method: str
    params: dict = field(default_factory=dict)
    vertices: np.ndarray | None = None

    def __len__(self):
        return len(self.values)

    def __getitem__(self, idx):
        return self.values[idx]

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)
