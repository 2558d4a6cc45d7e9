"""Synthetic operational data: ground-truth profiles, drift schedules,
mixture sampling and k-means derivation of bins from feature vectors.

All randomness comes from :func:`stream`, which derives an independent
generator per (root seed, purpose, index...) so that adding a new consumer
never shifts the numbers an existing one sees.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DimensionError, InvalidParameterError
from .profile import OccurrenceCounts, OperationalProfile, derive_profile

DEFAULT_BINS = 200
#: 6334 km of simulated driving at 200 demands per km.
GROUND_TRUTH_SAMPLES = 6334 * 200
R_LIMIT = 0.5
KMEANS_TOL = 1e-9
KMEANS_MAX_ITER = 100

SeedLike = int | np.random.SeedSequence | np.random.Generator


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Independent generator for one purpose (and optional cycle index)."""
    tag = zlib.crc32(purpose.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, *map(int, index)]))


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# --- ground truth and drift --------------------------------------------------

@dataclass(frozen=True)
class GroundTruthProfile:
    label: str
    profile: OperationalProfile
    counts: OccurrenceCounts | None = None

    def __len__(self) -> int:
        return len(self.profile)


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer counts proportional to ``weights`` summing to exactly ``total``."""
    exact = weights / weights.sum() * total
    base = np.floor(exact).astype(np.int64)
    short = total - int(base.sum())
    # biggest fractional parts first, lower index on ties
    order = np.lexsort((np.arange(exact.size), -(exact - base)))
    base[order[:short]] += 1
    return base


def parse_descriptor(descriptor: str) -> tuple[str, str]:
    """``"dirichlet:1.0"``, ``"zipf:1.1"`` or ``"file:path.csv"``."""
    kind, sep, arg = descriptor.partition(":")
    kind = kind.strip().lower()
    if kind not in ("dirichlet", "zipf", "file") or not sep or not arg:
        raise InvalidParameterError(
            f"bad ground-truth descriptor {descriptor!r}; use dirichlet:<alpha>, zipf:<s> or file:<path>"
        )
    return kind, arg.strip()


def generate_ground_truth(
    descriptor: str,
    n_bins: int = DEFAULT_BINS,
    seed: SeedLike = 0,
    *,
    label: str | None = None,
    total: int = GROUND_TRUTH_SAMPLES,
) -> GroundTruthProfile:
    """Ground-truth profile as integer counts over ``n_bins`` bins.

    Zipf profiles have their ranks shuffled so two cities built from
    different seeds disagree on which bins are common.
    """
    kind, arg = parse_descriptor(descriptor)
    label = label or descriptor
    if kind == "file":
        from .io import read_profile_csv

        counts = read_profile_csv(Path(arg))
        if len(counts) != n_bins and n_bins is not None:
            raise DimensionError(f"{arg}: expected {n_bins} bins, file has {len(counts)}")
        return GroundTruthProfile(label, derive_profile(counts), counts)

    if n_bins <= 0:
        raise InvalidParameterError("n_bins must be positive")
    if total <= 0:
        raise InvalidParameterError("total must be positive")
    try:
        param = float(arg)
    except ValueError:
        raise InvalidParameterError(f"bad parameter in descriptor {descriptor!r}") from None
    rng = _rng(seed)
    if kind == "dirichlet":
        if not param > 0:
            raise InvalidParameterError("dirichlet alpha must be positive")
        weights = rng.dirichlet(np.full(n_bins, param))
    else:
        if not param > 0:
            raise InvalidParameterError("zipf exponent must be positive")
        weights = 1.0 / np.arange(1, n_bins + 1, dtype=np.float64) ** param
        weights = weights[rng.permutation(n_bins)]
    counts = OccurrenceCounts(_largest_remainder(weights, total))
    return GroundTruthProfile(label, derive_profile(counts), counts)


@dataclass(frozen=True)
class DriftSchedule:
    """Mixing ratio r(t): zero until ``ramp_start``, then ``r_max`` after the ramp."""

    ramp_start: int
    ramp_end: int
    r_max: float = R_LIMIT
    shape: str = "linear"

    def __post_init__(self):
        if self.ramp_start < 0 or self.ramp_end < self.ramp_start:
            raise InvalidParameterError("need 0 <= ramp_start <= ramp_end")
        if not (0.0 <= self.r_max <= R_LIMIT):
            raise InvalidParameterError(f"r_max must be in [0, {R_LIMIT}], got {self.r_max!r}")
        if self.shape not in ("linear", "step"):
            raise InvalidParameterError(f"unknown drift shape {self.shape!r}")
        if self.shape == "step" and self.ramp_start == 0 and self.r_max > 0:
            raise InvalidParameterError("a step at cycle 0 would make r(0) > 0")

    def r(self, t: int) -> float:
        if t <= self.ramp_start:
            return 0.0
        if self.shape == "step" or t >= self.ramp_end:
            return self.r_max
        return self.r_max * (t - self.ramp_start) / (self.ramp_end - self.ramp_start)

    @classmethod
    def none(cls) -> "DriftSchedule":
        return cls(0, 0, 0.0, "linear")


def _probabilities(p) -> np.ndarray:
    if isinstance(p, GroundTruthProfile):
        return p.profile.probabilities
    if isinstance(p, OperationalProfile):
        return p.probabilities
    return OperationalProfile(p).probabilities


def sample_cycle(a, b, r: float, n_samples: int, seed: SeedLike) -> OccurrenceCounts:
    """Counts of ``n_samples`` draws, each from ``a`` w.p. 1-r and from ``b`` w.p. r.

    Drawing the number of ``b`` draws first and then two multinomials gives
    the same distribution as per-draw mixing.
    """
    pa, pb = _probabilities(a), _probabilities(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"profiles have different lengths: {pa.size} != {pb.size}")
    if not (0.0 <= r <= R_LIMIT):
        raise InvalidParameterError(f"mixing ratio must be in [0, {R_LIMIT}], got {r!r}")
    if n_samples < 0:
        raise InvalidParameterError("n_samples must be non-negative")
    rng = _rng(seed)
    from_b = int(rng.binomial(n_samples, r)) if r > 0 else 0
    counts = rng.multinomial(n_samples - from_b, pa)
    if from_b:
        counts = counts + rng.multinomial(from_b, pb)
    return OccurrenceCounts(counts)


# --- bins from features -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class BinModel:
    centroids: np.ndarray
    inertia: float = 0.0
    n_iter: int = 0
    inertia_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _as_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionError(f"feature data must be 2-D, got shape {x.shape}")
    return x


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        cum = np.cumsum(d2)
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        idx = min(idx, n - 1)
        while d2[idx] == 0:  # only reachable through the float edge of searchsorted
            idx -= 1
        chosen.append(idx)
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return x[chosen].copy()


def fit_bins(data, k: int = DEFAULT_BINS, seed: SeedLike = 0, *,
             tol: float = KMEANS_TOL, max_iter: int = KMEANS_MAX_ITER) -> BinModel:
    """k-means with seeded k-means++ seeding and Lloyd iterations."""
    x = _as_data(data)
    n = x.shape[0]
    if n == 0:
        raise InvalidParameterError("cannot fit bins to empty data")
    if k <= 0:
        raise InvalidParameterError("k must be positive")
    if k > n:
        raise InvalidParameterError(f"k={k} exceeds the number of data points ({n})")
    if np.unique(x, axis=0).shape[0] < k:
        raise InvalidParameterError(f"fewer than k={k} distinct data points")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("feature data contains non-finite values")

    centroids = _kmeans_pp(x, k, _rng(seed))
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, dist2 = _kernels.nearest_centroid(x, centroids)
        history.append(float(dist2.sum()))
        sizes = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        updated = centroids.copy()
        filled = sizes > 0
        updated[filled] = sums[filled] / sizes[filled, None]
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if shift < tol:
            break
    _, dist2 = _kernels.nearest_centroid(x, centroids)
    centroids.setflags(write=False)
    return BinModel(centroids, float(dist2.sum()), n_iter, tuple(history))


def assign_bins(model: BinModel, data) -> np.ndarray:
    x = _as_data(data)
    if x.shape[1] != model.dim:
        raise DimensionError(f"feature dimension {x.shape[1]} != model dimension {model.dim}")
    labels, _ = _kernels.nearest_centroid(x, model.centroids)
    return labels


def assign_bin(model: BinModel, x: Sequence[float]) -> int:
    """Nearest centroid, lowest index on ties."""
    v = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return int(assign_bins(model, v)[0])


def count_bins(model: BinModel, data) -> OccurrenceCounts:
    return OccurrenceCounts(np.bincount(assign_bins(model, data), minlength=model.k))


def generate_features(
    n: int, seed: SeedLike, *, dim: int = 2, n_modes: int = 8, spread: float = 0.6
) -> np.ndarray:
    """Gaussian-mixture feature vectors standing in for one city's recordings."""
    if n < 0 or dim <= 0 or n_modes <= 0:
        raise InvalidParameterError("n >= 0, dim > 0 and n_modes > 0 are required")
    rng = _rng(seed)
    centers = rng.uniform(-10.0, 10.0, size=(n_modes, dim))
    weights = rng.dirichlet(np.full(n_modes, 2.0))
    mode = rng.choice(n_modes, size=n, p=weights)
    return centers[mode] + rng.normal(scale=spread, size=(n, dim))


def entropy(profile: OperationalProfile) -> float:
    p = profile.probabilities
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
