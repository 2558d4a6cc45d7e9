"""Kernel backend selection.

The compiled extension is used when it imports; ``RISKALLOC_PURE_PYTHON=1``
forces the fallback. ``BACKEND`` names the active one.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_cy = None
if not os.environ.get("RISKALLOC_PURE_PYTHON"):
    try:
        from . import _kernels_cy as _cy
    except ImportError:
        _cy = None

BACKEND = "cython" if _cy is not None else "python"


def backends() -> dict:
    """All importable backends by name (used by tests and the benchmark)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels_cy
    except ImportError:
        pass
    else:
        found["cython"] = _kernels_cy
    return found


_impl = _cy if _cy is not None else _kernels_py


def round_greedy(values, coef, minimum) -> np.ndarray:
    return _impl.round_greedy(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(coef, dtype=np.float64),
        np.ascontiguousarray(minimum, dtype=np.int64),
    )


def round_sum_preserving(values, order) -> np.ndarray:
    return _impl.round_sum_preserving(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(order, dtype=np.int64),
    )


def nearest_centroid(data, centroids):
    return _impl.nearest_centroid(
        np.ascontiguousarray(data, dtype=np.float64),
        np.ascontiguousarray(centroids, dtype=np.float64),
    )
