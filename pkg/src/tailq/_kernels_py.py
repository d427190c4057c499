"""Pure-numpy implementations of the hot kernels.

Fallback used when the compiled tailq._kernels extension is unavailable
(or when forced via TAILQ_KERNELS=python). Must stay numerically
interchangeable with the compiled versions.
"""

from __future__ import annotations

import math

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gaussian_kde_grid(samples: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    """Mean-of-Gaussian-kernels density evaluated at each grid node."""
    z = (grid[:, None] - samples[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (samples.size * h * _SQRT_2PI)


def jensen_shannon_bits(p: np.ndarray, q: np.ndarray, dx: float) -> float:
    """JSD in bits between strictly positive densities on a shared uniform
    grid with spacing dx (trapezoidal KL integrals), clamped to [0, 1]."""
    m = 0.5 * (p + q)
    ip = p * np.log2(p / m)
    iq = q * np.log2(q / m)
    klp = ip[0] / 2 + ip[1:-1].sum() + ip[-1] / 2
    klq = iq[0] / 2 + iq[1:-1].sum() + iq[-1] / 2
    v = 0.5 * (klp + klq) * dx
    return min(1.0, max(0.0, float(v)))
