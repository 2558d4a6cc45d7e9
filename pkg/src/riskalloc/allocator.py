"""Closed-form test allocation and integer rounding.

Two problems share one structure. With per-cell weight
``c_ie = lambda_e * epsilon_e * p_i`` the risk is ``sum c_ie / (2 + t_ie)``:

* minimise the number of tests subject to ``risk <= ub``;
* minimise risk subject to ``sum t_ie = T``.

Both have closed-form real solutions proportional to ``sqrt(c_ie)``. Integer
solutions come from two greedy rounding passes that share an accumulator
across cells, so they run sequentially (see ``_kernels``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DimensionError, InfeasibleBudgetError, InvalidParameterError, RoundingError
from .hazard import HazardScenario, TestAllocation, hazard_weights, risk_terms, risk_value
from .profile import OperationalProfile

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RealAllocation:
    """Real-valued test counts (> -2) before rounding.

    ``no_tests_needed`` is set when every cell weight is zero, i.e. the risk is
    identically zero whatever the allocation.
    """

    values: np.ndarray
    no_tests_needed: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class AllocationBudget:
    mode: str
    ub: float | None = None
    total_tests: int | None = None

    def __post_init__(self):
        if self.mode == "upper_bound":
            if self.ub is None or not self.ub > 0:
                raise InvalidParameterError("upper_bound budget needs ub > 0")
        elif self.mode == "test_sum":
            if self.total_tests is None or self.total_tests < 0:
                raise InvalidParameterError("test_sum budget needs total_tests >= 0")
        else:
            raise InvalidParameterError(f"unknown budget mode {self.mode!r}")


def _sqrt_factors(profile: OperationalProfile, hazards: Sequence[HazardScenario]):
    if not hazards:
        raise InvalidParameterError("at least one hazard is required")
    w = hazard_weights(hazards)
    p = profile.probabilities
    if np.any(w < 0) or np.any(p < 0):
        raise InvalidParameterError("square roots need non-negative lambda*epsilon and p")
    return np.sqrt(w), np.sqrt(p)


def _check_ub(ub: float):
    if not (ub > 0 and np.isfinite(ub)):
        raise InvalidParameterError(f"upper bound must be positive, got {ub!r}")


def _check_alloc(alloc: TestAllocation, n_hazards: int, n_bins: int):
    if alloc.shape != (n_hazards, n_bins):
        raise DimensionError(f"allocation shape {alloc.shape} != {(n_hazards, n_bins)}")


# --- real-valued solutions ---------------------------------------------------

def solve_min_tests(profile: OperationalProfile, hazards: Sequence[HazardScenario], ub: float) -> RealAllocation:
    """Fewest tests keeping risk <= ub (real relaxation, KKT solution)."""
    _check_ub(ub)
    sw, sp = _sqrt_factors(profile, hazards)
    scale = sw.sum() * sp.sum()
    if scale == 0:
        return RealAllocation(np.zeros((sw.size, sp.size)), no_tests_needed=True)
    values = np.outer(sw, sp) * (scale / ub) - 2.0
    return RealAllocation(values)


def min_tests_bound(profile: OperationalProfile, hazards: Sequence[HazardScenario], ub: float) -> float:
    """Lower bound on the total number of tests needed for risk <= ub."""
    _check_ub(ub)
    sw, sp = _sqrt_factors(profile, hazards)
    return float((sw.sum() ** 2) * (sp.sum() ** 2) / ub - 2 * sw.size * sp.size)


def solve_min_risk(profile: OperationalProfile, hazards: Sequence[HazardScenario], total_tests: int) -> RealAllocation:
    """Lowest-risk split of exactly ``total_tests`` tests (real relaxation)."""
    if total_tests < 0:
        raise InvalidParameterError(f"total tests must be non-negative, got {total_tests!r}")
    sw, sp = _sqrt_factors(profile, hazards)
    cells = sw.size * sp.size
    scale = sw.sum() * sp.sum()
    if scale == 0:
        return RealAllocation(np.full((sw.size, sp.size), total_tests / cells), no_tests_needed=True)
    values = np.outer(sw, sp) * ((total_tests + 2 * cells) / scale) - 2.0
    return RealAllocation(values)


def min_risk_bound(profile: OperationalProfile, hazards: Sequence[HazardScenario], total_tests: int) -> float:
    """Smallest achievable risk with ``total_tests`` tests (real relaxation)."""
    sw, sp = _sqrt_factors(profile, hazards)
    return float((sw.sum() ** 2) * (sp.sum() ** 2) / (total_tests + 2 * sw.size * sp.size))


# --- rounding ----------------------------------------------------------------

def naive_round_up(real_alloc: RealAllocation) -> TestAllocation:
    """Round every cell up independently (parallel-friendly, more tests)."""
    return TestAllocation(np.maximum(0, np.ceil(real_alloc.values - 1e-9)).astype(np.int64))


def _repair(tests: np.ndarray, p: np.ndarray, w: np.ndarray, ub: float, allowed: np.ndarray | None = None) -> int:
    """Add single tests where they cut the most risk until risk <= ub.

    Only needed when floating-point error leaves the greedy result a few ulps
    above the bound. Mutates ``tests``; returns how many tests were added.
    """
    added = 0
    while risk_value(p, w, tests) > ub:
        gain = risk_terms(p, w, tests) - risk_terms(p, w, tests + 1)
        if allowed is not None:
            gain = np.where(allowed, gain, -np.inf)
        k = int(np.argmax(gain))  # first maximum = lowest (hazard, bin) index
        if not gain.flat[k] > 0:
            raise RoundingError("cannot reach the upper bound by adding tests")
        tests.flat[k] += 1
        added += 1
    if added:
        log.debug("rounding repair added %d test(s)", added)
    return added


def round_min_tests(
    real_alloc: RealAllocation,
    profile: OperationalProfile,
    hazards: Sequence[HazardScenario],
    ub: float,
    minimum: TestAllocation | None = None,
) -> TestAllocation:
    """Integer allocation with risk <= ub and at most the naive round-up total.

    Cells are visited in (hazard, bin) order. ``minimum`` lifts cells to
    already-executed test counts; the risk saved by lifting is banked like a
    round-up.
    """
    _check_ub(ub)
    shape = real_alloc.shape
    if shape != (len(hazards), len(profile)):
        raise DimensionError(f"real allocation shape {shape} != {(len(hazards), len(profile))}")
    low = np.zeros(shape, dtype=np.int64) if minimum is None else minimum.tests
    if low.shape != shape:
        raise DimensionError(f"minimum shape {low.shape} != {shape}")
    if real_alloc.no_tests_needed:
        return TestAllocation(low.copy())
    p = profile.probabilities
    w = hazard_weights(hazards)
    coef = np.outer(w, p)
    tests = _kernels.round_greedy(real_alloc.values.ravel(), coef.ravel(), low.ravel()).reshape(shape)
    _repair(tests, p, w, ub)
    return TestAllocation(tests)


def project_nonnegative(values: np.ndarray, total_tests: int) -> np.ndarray:
    """Min-risk solution restricted to t >= 0 (water-filling).

    For closed-form min-risk values, ``t + 2`` is proportional to
    ``sqrt(c)``, so the constrained optimum can be recovered from the values
    alone: keep the cells with the largest ``t + 2`` active, give the rest zero
    tests, and re-spread ``total_tests`` over the active cells.
    """
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.min() >= 0:
        return flat.copy()
    weight = np.maximum(flat + 2.0, 0.0)
    order = np.argsort(-weight, kind="stable")
    prefix = np.cumsum(weight[order])
    out = np.zeros_like(flat)
    for j in range(flat.size, 0, -1):
        if prefix[j - 1] <= 0:
            continue
        factor = (total_tests + 2 * j) / prefix[j - 1]
        if weight[order[j - 1]] * factor - 2.0 >= 0:
            active = order[:j]
            out[active] = weight[active] * factor - 2.0
            break
    return out


def polish_exchange(tests: np.ndarray, coef: np.ndarray) -> int:
    """Move single tests between cells while that lowers ``sum coef / (2 + t)``.

    For this separable convex objective under a fixed sum, no improving
    single-unit move means the allocation is the integer optimum. Mutates
    ``tests`` (flat); returns the number of moves.
    """
    moves = 0
    active = coef > 0
    while True:
        gain = np.where(active, coef / (2.0 + tests) - coef / (3.0 + tests), -np.inf)
        loss = np.where(tests > 0, coef / (1.0 + tests) - coef / (2.0 + tests), np.inf)
        to = int(np.argmax(gain))
        frm = int(np.argmin(loss))
        if to == frm or not gain[to] > loss[frm] * (1.0 + 1e-12):
            return moves
        tests[frm] -= 1
        tests[to] += 1
        moves += 1


def round_min_risk(real_alloc: RealAllocation, total_tests: int, *, polish: bool = True) -> TestAllocation:
    """Sum-preserving rounding, visiting cells from the smallest value up.

    Negative values are first replaced by the t >= 0 optimum
    (:func:`project_nonnegative`); the carry then only moves fractional parts.
    Ties in value keep (hazard, bin) order. With ``polish`` the carried result
    is refined by :func:`polish_exchange`, using cell weights proportional to
    ``(t + 2) ** 2`` of the closed-form values. The output sums to
    ``total_tests``.
    """
    if total_tests < 0:
        raise InvalidParameterError("total tests must be non-negative")
    raw = real_alloc.values.ravel()
    flat = project_nonnegative(raw, total_tests)
    order = np.argsort(flat, kind="stable")
    tests = _kernels.round_sum_preserving(flat, order)
    got = int(tests.sum())
    if got != total_tests:
        raise RoundingError(f"rounded allocation sums to {got}, expected {total_tests}")
    if polish and not real_alloc.no_tests_needed:
        moves = polish_exchange(tests, np.maximum(raw + 2.0, 0.0) ** 2)
        if moves:
            log.debug("exchange polish moved %d test(s)", moves)
    return TestAllocation(tests.reshape(real_alloc.shape))


def allocate_min_tests(profile, hazards, ub) -> TestAllocation:
    return round_min_tests(solve_min_tests(profile, hazards, ub), profile, hazards, ub)


def allocate_min_risk(profile, hazards, total_tests) -> TestAllocation:
    return round_min_risk(solve_min_risk(profile, hazards, total_tests), total_tests)


# --- profile change ----------------------------------------------------------

def grown_bins(old_profile: OperationalProfile, new_profile: OperationalProfile) -> np.ndarray:
    """Mask of bins whose probability strictly increased."""
    if len(old_profile) != len(new_profile):
        raise DimensionError(f"profiles have different lengths: {len(old_profile)} != {len(new_profile)}")
    return new_profile.probabilities > old_profile.probabilities


def covered_risk(new_profile, hazards, old_alloc, grown: np.ndarray) -> float:
    """Risk on the bins that did not grow, with their existing tests frozen."""
    terms = risk_terms(new_profile.probabilities, hazard_weights(hazards), old_alloc.tests)
    return float(terms[:, ~grown].sum())


def solve_additional_min_tests(
    old_profile: OperationalProfile,
    new_profile: OperationalProfile,
    hazards: Sequence[HazardScenario],
    old_alloc: TestAllocation,
    ub: float,
) -> TestAllocation:
    """Fewest additional tests restoring risk <= ub after the profile moved.

    Only bins that grew receive tests; the others keep their tests and their
    risk is charged against the bound first. Raises ``InfeasibleBudgetError``
    when that charge alone reaches ``ub`` (exceeds it, if no bin grew).
    """
    _check_ub(ub)
    n_h, n_b = len(hazards), len(new_profile)
    _check_alloc(old_alloc, n_h, n_b)
    grown = grown_bins(old_profile, new_profile)
    r_cov = covered_risk(new_profile, hazards, old_alloc, grown)
    additional = np.zeros((n_h, n_b), dtype=np.int64)
    if not grown.any():
        # nothing can receive tests; the frozen risk only has to respect ub itself
        if r_cov > ub:
            raise InfeasibleBudgetError(r_cov, ub)
        return TestAllocation(additional)
    if r_cov >= ub:
        raise InfeasibleBudgetError(r_cov, ub)

    sw, sp = _sqrt_factors(new_profile, hazards)
    sp_g = sp[grown]
    scale = sw.sum() * sp_g.sum()
    old_g = old_alloc.tests[:, grown]
    if scale == 0:
        return TestAllocation(additional)
    budget = ub - r_cov
    values = np.outer(sw, sp_g) * (scale / budget) - 2.0

    p, w = new_profile.probabilities, hazard_weights(hazards)
    coef = np.outer(w, p[grown])
    target_g = _kernels.round_greedy(values.ravel(), coef.ravel(), old_g.ravel()).reshape(old_g.shape)
    full = old_alloc.tests.copy()
    full[:, grown] = target_g
    _repair(full, p, w, ub, allowed=np.broadcast_to(grown, full.shape))
    additional[:, grown] = full[:, grown] - old_g
    return TestAllocation(additional)


def solve_required_tests(
    old_profile: OperationalProfile,
    new_profile: OperationalProfile,
    hazards: Sequence[HazardScenario],
    old_alloc: TestAllocation,
    ub: float,
) -> TestAllocation:
    """Additional tests for risk <= ub, escalating when grown bins alone cannot do it.

    The escalation re-solves the min-tests problem over all bins on the new
    profile and never goes below the existing tests.
    """
    try:
        return solve_additional_min_tests(old_profile, new_profile, hazards, old_alloc, ub)
    except InfeasibleBudgetError as exc:
        log.info("grown-bin re-planning infeasible (covered risk %.6g >= %.6g); re-solving all bins", exc.r_cov, ub)
    full = round_min_tests(solve_min_tests(new_profile, hazards, ub), new_profile, hazards, ub, minimum=old_alloc)
    return TestAllocation(full.tests - old_alloc.tests)


def solve_additional_min_risk(
    old_profile: OperationalProfile,
    new_profile: OperationalProfile,
    hazards: Sequence[HazardScenario],
    old_alloc: TestAllocation,
    m: int,
) -> TestAllocation:
    """Place exactly ``m`` new tests on the bins that grew.

    The split over grown bins is the min-risk solution for ``m`` tests on those
    bins alone. If no bin grew (profile unchanged) the ``m`` tests are split
    over all bins by the same rule.
    """
    if m < 0:
        raise InvalidParameterError(f"budget must be non-negative, got {m!r}")
    n_h, n_b = len(hazards), len(new_profile)
    _check_alloc(old_alloc, n_h, n_b)
    grown = grown_bins(old_profile, new_profile)
    additional = np.zeros((n_h, n_b), dtype=np.int64)
    if m == 0:
        return TestAllocation(additional)
    if not grown.any():
        log.debug("no bin grew; spreading %d tests over all bins", m)
        return allocate_min_risk(new_profile, hazards, m)

    sw, sp = _sqrt_factors(new_profile, hazards)
    sp_g = sp[grown]
    cells = sw.size * sp_g.size
    scale = sw.sum() * sp_g.sum()
    if scale == 0:
        values = np.full((sw.size, sp_g.size), m / cells)
    else:
        values = np.outer(sw, sp_g) * ((m + 2 * cells) / scale) - 2.0
    placed = round_min_risk(RealAllocation(values), m)
    additional[:, grown] = placed.tests
    return TestAllocation(additional)
