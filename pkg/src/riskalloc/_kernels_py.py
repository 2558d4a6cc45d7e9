"""Pure-Python kernels. ``_kernels_cy.pyx`` mirrors these operation for operation,
so both backends return identical results."""
from __future__ import annotations

from math import floor

import numpy as np

SNAP_TOL = 1e-9


def _snap(x: float) -> float:
    r = floor(x + 0.5)
    if abs(x - r) <= SNAP_TOL * max(1.0, abs(x)):
        return float(r)
    return x


def round_greedy(values, coef, minimum):
    """Round each value up or down, trading accumulated risk slack.

    Rounding up is the default and banks the risk decrease; a value is rounded
    down instead when the risk it adds is strictly below the banked slack.
    Values at or below ``minimum`` are lifted to it and their decrease is banked.
    """
    n = values.shape[0]
    out = np.empty(n, dtype=np.int64)
    acc = 0.0
    for k in range(n):
        x = _snap(float(values[k]))
        c = float(coef[k])
        low = int(minimum[k])
        if x <= low:
            out[k] = low
            if c > 0.0 and x > -2.0:  # no risk to bank below t = -2 or without weight
                acc += c / (2.0 + x) - c / (2.0 + low)
            continue
        lo = floor(x)
        if lo == x:
            out[k] = lo
            continue
        inc = c / (2.0 + lo) - c / (2.0 + x)
        if inc < acc:
            out[k] = lo
            acc -= inc
        else:
            out[k] = lo + 1
            acc += c / (2.0 + x) - c / (2.0 + (lo + 1))
    return out


def round_sum_preserving(values, order):
    """Walk values in ``order`` carrying the fractional remainder forward.

    Each value becomes floor(value + carry), clamped at zero; the carry is what
    was cut off (negative after a clamp, which later values pay back).
    """
    n = values.shape[0]
    out = np.zeros(n, dtype=np.int64)
    acc = 0.0
    for j in range(n):
        k = int(order[j])
        y = _snap(float(values[k])) + acc
        q = floor(y + SNAP_TOL * max(1.0, abs(y)))
        if q < 0:
            q = 0
        out[k] = q
        acc = y - q
    return out


def nearest_centroid(data, centroids, chunk: int = 4096):
    """Index of the nearest centroid per row (squared Euclidean, lowest index on ties)."""
    n, d = data.shape
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    for start in range(0, n, chunk):
        block = data[start:start + chunk]
        acc = np.zeros((block.shape[0], centroids.shape[0]), dtype=np.float64)
        for j in range(d):
            diff = block[:, j, None] - centroids[None, :, j]
            acc += diff * diff
        idx = np.argmin(acc, axis=1)
        labels[start:start + chunk] = idx
        dist2[start:start + chunk] = acc[np.arange(block.shape[0]), idx]
    return labels, dist2
