"""Coverage and histogram-entropy diagnostics on a regular grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass
class CoverageGrid:
    lo: np.ndarray
    hi: np.ndarray
    resolution: int = 50
    visited: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.lo = np.ascontiguousarray(self.lo, dtype=np.float64)
        self.hi = np.ascontiguousarray(self.hi, dtype=np.float64)
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1 or np.any(self.hi <= self.lo):
            raise ValueError("grid bounds must satisfy lo < hi per axis")
        if self.visited is None:
            self.visited = np.zeros((self.resolution,) * self.dim, dtype=bool)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def n_cells(self) -> int:
        return self.resolution**self.dim

    def cells(self, pts) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
        if pts.shape[1] != self.dim:
            raise ValueError(f"points have dimension {pts.shape[1]}, grid has {self.dim}")
        return kernels.cell_index(pts, self.lo, self.hi, self.resolution)

    def centers(self) -> np.ndarray:
        axes = [self.lo[k] + (np.arange(self.resolution) + 0.5) * (self.hi[k] - self.lo[k]) / self.resolution for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def maze_grid(resolution: int = 50) -> CoverageGrid:
    return CoverageGrid(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), resolution)


def coverage_update(g: CoverageGrid, s_proj) -> None:
    """Mark the cells containing the given point(s); out-of-range points use edge cells."""
    g.visited.reshape(-1)[g.cells(s_proj)] = True


def coverage_value(g: CoverageGrid) -> float:
    """Percentage of visited cells."""
    return 100.0 * float(np.count_nonzero(g.visited)) / g.n_cells


def histogram_entropy(states, g: CoverageGrid) -> float:
    """Plug-in Shannon entropy (nats) of the cell histogram of ``states``."""
    states = np.atleast_2d(states)
    if len(states) == 0:
        raise ValueError("histogram_entropy needs at least one state")
    counts = np.bincount(g.cells(states), minlength=g.n_cells)
    p = counts[counts > 0] / len(states)
    return float(-np.sum(p * np.log(p)))
