"""Binned operational profiles built from occurrence counts.

Counts are cumulative; a monitoring cycle simply adds its counts to the
running totals and the profile is re-derived from the sums.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, EmptyProfileError, InvalidParameterError

PROFILE_SUM_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OccurrenceCounts:
    """Non-negative occurrence counts, one per subdomain (bin)."""

    counts: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.counts)
        if raw.ndim != 1:
            raise DimensionError(f"counts must be one-dimensional, got shape {raw.shape}")
        if raw.size and raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.floor(raw)):
                raise InvalidParameterError("counts must be whole numbers")
        if raw.size and np.any(raw < 0):
            raise InvalidParameterError("counts must be non-negative")
        object.__setattr__(self, "counts", _frozen(raw.astype(np.uint64, copy=True)))

    @classmethod
    def zeros(cls, n_bins: int) -> "OccurrenceCounts":
        return cls(np.zeros(n_bins, dtype=np.uint64))

    @property
    def total(self) -> int:
        return int(self.counts.sum(dtype=np.uint64))

    def __len__(self) -> int:
        return self.counts.shape[0]

    def __eq__(self, other):
        if not isinstance(other, OccurrenceCounts):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"OccurrenceCounts(n={len(self)}, total={self.total})"


@dataclass(frozen=True, eq=False)
class OperationalProfile:
    """Discrete probability distribution over the bins."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=np.float64)
        if p.ndim != 1:
            raise DimensionError(f"profile must be one-dimensional, got shape {p.shape}")
        if p.size == 0:
            raise EmptyProfileError("profile has no bins")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise InvalidParameterError("probabilities must lie in [0, 1]")
        if abs(p.sum() - 1.0) > PROFILE_SUM_TOL * max(1, p.size):
            raise InvalidParameterError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probabilities", _frozen(p))

    def __len__(self) -> int:
        return self.probabilities.shape[0]

    def __eq__(self, other):
        if not isinstance(other, OperationalProfile):
            return NotImplemented
        return np.array_equal(self.probabilities, other.probabilities)

    def __repr__(self):
        return f"OperationalProfile(n={len(self)})"


def _check_same_length(a, b, what: str = "profiles"):
    if len(a) != len(b):
        raise DimensionError(f"{what} have different lengths: {len(a)} != {len(b)}")


def derive_profile(counts: OccurrenceCounts) -> OperationalProfile:
    """p_i = o_i / |O|. An all-zero count vector is an error, not a uniform profile."""
    total = counts.total
    if total == 0:
        raise EmptyProfileError("cannot derive a profile from zero observations")
    return OperationalProfile(counts.counts.astype(np.float64) / float(total))


def aggregate_updates(batch: Iterable[OccurrenceCounts], n_bins: int | None = None) -> OccurrenceCounts:
    """Elementwise sum of update batches from many monitored instances.

    ``n_bins`` is only needed to size the result of an empty batch list.
    """
    batch = list(batch)
    if not batch:
        if n_bins is None:
            return OccurrenceCounts(np.zeros(0, dtype=np.uint64))
        return OccurrenceCounts.zeros(n_bins)
    n = len(batch[0])
    if n_bins is not None and n != n_bins:
        raise DimensionError(f"expected {n_bins} bins, got {n}")
    acc = np.zeros(n, dtype=np.uint64)
    for item in batch:
        _check_same_length(item, batch[0], "update batches")
        acc += item.counts
    return OccurrenceCounts(acc)


def update_profile(
    counts: OccurrenceCounts, updates: OccurrenceCounts
) -> tuple[OccurrenceCounts, OperationalProfile]:
    """Add monitored counts and re-derive the profile."""
    _check_same_length(counts, updates, "counts and updates")
    merged = OccurrenceCounts(counts.counts + updates.counts)
    return merged, derive_profile(merged)


def profile_delta(a: OperationalProfile, b: OperationalProfile) -> float:
    """L1 distance between two profiles, in [0, 2]."""
    _check_same_length(a, b)
    return float(np.abs(a.probabilities - b.probabilities).sum())


def as_profile(p: OperationalProfile | Sequence[float] | np.ndarray) -> OperationalProfile:
    return p if isinstance(p, OperationalProfile) else OperationalProfile(np.asarray(p, dtype=float))
