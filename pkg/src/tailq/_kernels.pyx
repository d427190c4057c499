# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: Gaussian kernel sums on a grid and Jensen-Shannon
divergence between aligned density vectors.

Semantics must stay interchangeable with tailq._kernels_py; the backend is
picked at import time in tailq.kernels.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log2, sqrt

cnp.import_array()

cdef double SQRT_2PI = sqrt(2.0 * 3.14159265358979323846)


def gaussian_kde_grid(double[::1] samples, double[::1] grid, double h):
    """Mean-of-Gaussian-kernels density evaluated at each grid node.

    out[g] = 1/(m*h) * sum_j phi((grid[g] - samples[j]) / h)
    """
    cdef Py_ssize_t m = samples.shape[0]
    cdef Py_ssize_t n = grid.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double acc, z
    cdef double inv_h = 1.0 / h
    cdef double norm = 1.0 / (m * h * SQRT_2PI)
    for i in range(n):
        acc = 0.0
        for j in range(m):
            z = (grid[i] - samples[j]) * inv_h
            acc += exp(-0.5 * z * z)
        ov[i] = acc * norm
    return out


def jensen_shannon_bits(double[::1] p, double[::1] q, double dx):
    """Jensen-Shannon divergence in bits between two densities sampled on a
    shared uniform grid with spacing dx, via trapezoidal KL integrals.

    Inputs must be strictly positive (caller floors at epsilon). Result is
    clamped to [0, 1].
    """
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double klp = 0.0
    cdef double klq = 0.0
    cdef double m, w, v
    for i in range(n):
        m = 0.5 * (p[i] + q[i])
        w = 0.5 if (i == 0 or i == n - 1) else 1.0
        klp += w * p[i] * log2(p[i] / m)
        klq += w * q[i] * log2(q[i] / m)
    v = 0.5 * (klp + klq) * dx
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v
