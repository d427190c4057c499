"""Backend selection for the numeric inner loops.

The compiled Cython extension is preferred; the pure-numpy fallback is used
when the extension is missing or when TAILQ_KERNELS=python is set. Both
expose the same two functions:

    gaussian_kde_grid(samples, grid, h) -> ndarray
    jensen_shannon_bits(p, q, dx)       -> float
"""

from __future__ import annotations

import logging
import os

log = logging.getLogger("tailq")

_forced = os.environ.get("TAILQ_KERNELS", "").strip().lower()

if _forced == "python":
    from tailq import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from tailq import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from tailq import _kernels_py as _impl  # type: ignore[no-redef]

        BACKEND = "python"
        if _forced == "cython":
            log.warning("compiled kernels requested but unavailable; using python fallback")

gaussian_kde_grid = _impl.gaussian_kde_grid
jensen_shannon_bits = _impl.jensen_shannon_bits
