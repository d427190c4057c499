"""Divergences between fitted latency densities: JSD and its square root.

Base-2 logarithms keep the Jensen-Shannon divergence in [0, 1]; rJSD (the
square root) is a metric and is what convergence and generalization checks
compare against tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tailq.kde import DensityModel
from tailq.kernels import jensen_shannon_bits

EPSILON = 1e-12


@dataclass(frozen=True, eq=False)
class AlignedDensityPair:
    """Two densities interpolated onto one uniform grid and renormalized."""

    grid: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])


def _trapz(y: np.ndarray, dx: float) -> float:
    return float(dx * (y[0] / 2 + y[1:-1].sum() + y[-1] / 2))


def align(a: DensityModel, b: DensityModel, grid_points: int | None = None) -> AlignedDensityPair:
    """Interpolate both densities onto their union support.

    The shared grid is uniform with max(a, b) resolution unless overridden;
    values are floored at EPSILON and renormalized so disjoint supports
    compare as maximally divergent rather than erroring.
    """
    lo = min(a.support_min, b.support_min)
    hi = max(a.support_max, b.support_max)
    n = grid_points if grid_points is not None else max(a.grid_points, b.grid_points)
    grid = np.linspace(lo, hi, n)
    dx = float(grid[1] - grid[0])
    p = np.maximum(np.interp(grid, a.grid, a.density, left=0.0, right=0.0), EPSILON)
    q = np.maximum(np.interp(grid, b.grid, b.density, left=0.0, right=0.0), EPSILON)
    p = p / _trapz(p, dx)
    q = q / _trapz(q, dx)
    return AlignedDensityPair(grid=grid, p=p, q=q)


def jsd(pair: AlignedDensityPair) -> float:
    """Jensen-Shannon divergence of the pair, in bits, clamped to [0, 1]."""
    p = np.maximum(np.asarray(pair.p, dtype=np.float64), EPSILON)
    q = np.maximum(np.asarray(pair.q, dtype=np.float64), EPSILON)
    return float(jensen_shannon_bits(p, q, pair.dx))


def rjsd(pair: AlignedDensityPair) -> float:
    """Square root of the Jensen-Shannon divergence (a metric in [0, 1])."""
    return float(np.sqrt(jsd(pair)))


def jsd_between(a: DensityModel, b: DensityModel) -> float:
    return jsd(align(a, b))


def rjsd_between(a: DensityModel, b: DensityModel) -> float:
    return rjsd(align(a, b))
