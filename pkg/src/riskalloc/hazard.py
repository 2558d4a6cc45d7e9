"""Hazard scenarios, Laplace-rule failure probabilities and risk per demand."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .profile import OperationalProfile

#: One tire blowout per 16,278 km at 200 planning steps (demands) per km.
KM_PER_BLOWOUT = 16_278
DEMANDS_PER_KM = 200
DEFAULT_LAMBDA = 1.0 / (KM_PER_BLOWOUT * DEMANDS_PER_KM)
DEFAULT_EPSILON = 1.0
DEFAULT_UB = 1.0e-4


@dataclass(frozen=True)
class HazardScenario:
    """A critical scenario with per-demand likelihood ``lam`` and severity ``epsilon``."""

    id: str
    lam: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise InvalidParameterError(f"hazard {self.id!r}: lambda must be in [0, 1], got {self.lam!r}")
        if not (self.epsilon >= 0.0 and np.isfinite(self.epsilon)):
            raise InvalidParameterError(f"hazard {self.id!r}: epsilon must be >= 0, got {self.epsilon!r}")

    @property
    def weight(self) -> float:
        return self.lam * self.epsilon


def default_hazards() -> list[HazardScenario]:
    return [HazardScenario("tire-blowout", DEFAULT_LAMBDA, DEFAULT_EPSILON)]


@dataclass(frozen=True, eq=False)
class TestAllocation:
    """Integer test counts, rows = hazards, columns = bins."""

    __test__ = False

    tests: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tests)
        if t.ndim != 2:
            raise DimensionError(f"allocation must be 2-D (hazards x bins), got shape {t.shape}")
        if t.size and t.dtype.kind == "f" and np.any(t != np.floor(t)):
            raise InvalidParameterError("test counts must be integers")
        t = t.astype(np.int64, copy=True)
        if np.any(t < 0):
            raise InvalidParameterError("test counts must be non-negative")
        t.setflags(write=False)
        object.__setattr__(self, "tests", t)

    @classmethod
    def zeros(cls, n_hazards: int, n_bins: int) -> "TestAllocation":
        return cls(np.zeros((n_hazards, n_bins), dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.tests.shape

    @property
    def total(self) -> int:
        return int(self.tests.sum())

    def __add__(self, other: "TestAllocation") -> "TestAllocation":
        if self.shape != other.shape:
            raise DimensionError(f"allocation shapes differ: {self.shape} != {other.shape}")
        return TestAllocation(self.tests + other.tests)

    def __eq__(self, other):
        if not isinstance(other, TestAllocation):
            return NotImplemented
        return np.array_equal(self.tests, other.tests)

    def __repr__(self):
        return f"TestAllocation(shape={self.shape}, total={self.total})"


@dataclass(frozen=True, eq=False)
class RiskReport:
    total: float
    contributions: np.ndarray


def pfd(successful_tests: int) -> float:
    """Laplace rule of succession after ``t`` passing tests: 1 / (2 + t)."""
    if successful_tests < 0:
        raise InvalidParameterError("number of tests must be non-negative")
    return 1.0 / (2.0 + successful_tests)


def overall_pfd(profile: OperationalProfile, tests_per_bin: Sequence[int]) -> float:
    t = np.asarray(tests_per_bin, dtype=np.float64)
    if t.shape != (len(profile),):
        raise DimensionError(f"expected {len(profile)} test counts, got shape {t.shape}")
    return float((profile.probabilities / (2.0 + t)).sum())


def hazard_weights(hazards: Sequence[HazardScenario]) -> np.ndarray:
    """lambda_e * epsilon_e per hazard."""
    return np.array([h.lam * h.epsilon for h in hazards], dtype=np.float64)


def cell_coefficients(profile: OperationalProfile, hazards: Sequence[HazardScenario]) -> np.ndarray:
    """lambda_e * epsilon_e * p_i for every (hazard, bin) cell."""
    return np.outer(hazard_weights(hazards), profile.probabilities)


def risk_per_demand(
    profile: OperationalProfile, hazards: Sequence[HazardScenario], alloc: TestAllocation
) -> RiskReport:
    """Sum over hazards and bins of p_i * lambda_e * epsilon_e / (2 + t_ie)."""
    expected = (len(hazards), len(profile))
    if alloc.shape != expected:
        raise DimensionError(f"allocation shape {alloc.shape} does not match hazards x bins {expected}")
    contrib = risk_terms(profile.probabilities, hazard_weights(hazards), alloc.tests)
    contrib.setflags(write=False)
    return RiskReport(float(contrib.sum()), contrib)


def risk_terms(p: np.ndarray, weights: np.ndarray, tests: np.ndarray) -> np.ndarray:
    """Per-cell risk. Every risk figure in the package goes through this expression."""
    # (p / (2+t)) first, then the hazard factor
    return (p[None, :] / (2.0 + tests)) * weights[:, None]


def risk_value(p: np.ndarray, weights: np.ndarray, tests: np.ndarray) -> float:
    return float(risk_terms(p, weights, tests).sum())


def check_upper_bound(report: RiskReport | float, ub: float) -> bool:
    """Inclusive comparison against the upper bound, no tolerance."""
    if not ub > 0:
        raise InvalidParameterError(f"upper bound must be positive, got {ub!r}")
    total = report.total if isinstance(report, RiskReport) else float(report)
    return total <= ub
