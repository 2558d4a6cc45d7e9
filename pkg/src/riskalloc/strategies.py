"""Run-time feedback loop: monitor the profile, re-estimate risk, plan and
execute additional tests.

Three strategies:

``maintain``  add the fewest tests that bring risk back under ``ub``;
``minimize``  add a fixed budget of ``m`` tests every cycle;
``combined``  add the ``m`` tests, then top up if risk is still above ``ub``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Protocol, Sequence

import numpy as np

from . import allocator
from .drift import DEFAULT_BINS, DriftSchedule, GroundTruthProfile, generate_ground_truth, sample_cycle, stream
from .errors import InvalidParameterError, TestFailureError
from .hazard import HazardScenario, TestAllocation, hazard_weights, risk_value
from .profile import OccurrenceCounts, OperationalProfile, derive_profile, profile_delta, update_profile

log = logging.getLogger(__name__)

STRATEGIES = ("maintain", "minimize", "combined")
DEFAULT_SAMPLES_PER_CYCLE = 1000
DEFAULT_SOURCE = "dirichlet:1.0"


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    delta_to_initial: float
    risk_controlled: float
    risk_uncontrolled: float
    tests_added: int
    tests_total: int


@dataclass(frozen=True)
class StrategyConfig:
    kind: str
    ub: float | None = None
    budget: int | None = None

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise InvalidParameterError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.kind in ("maintain", "combined") and (self.ub is None or not self.ub > 0):
            raise InvalidParameterError(f"strategy {self.kind!r} needs ub > 0")
        if self.kind in ("minimize", "combined") and (self.budget is None or self.budget < 0):
            raise InvalidParameterError(f"strategy {self.kind!r} needs a budget >= 0")
        if self.ub is not None and not self.ub > 0:
            raise InvalidParameterError("ub must be positive")


# --- test execution ----------------------------------------------------------

@dataclass(frozen=True)
class ExecutionResult:
    passed: np.ndarray
    failed: np.ndarray


class TestExecutor(Protocol):
    def execute(self, additional: TestAllocation) -> ExecutionResult: ...


class PassingExecutor:
    """Simulated executor: every test passes (no accident observed)."""

    def __init__(self):
        self.executed = 0

    def execute(self, additional: TestAllocation) -> ExecutionResult:
        self.executed += additional.total
        return ExecutionResult(additional.tests.copy(), np.zeros_like(additional.tests))


class FailingExecutor:
    """Fails one test on the ``fail_on_call``-th call with a non-empty request."""

    def __init__(self, fail_on_call: int = 1):
        self.fail_on_call = fail_on_call
        self.calls = 0

    def execute(self, additional: TestAllocation) -> ExecutionResult:
        passed = additional.tests.copy()
        failed = np.zeros_like(passed)
        if additional.total:
            self.calls += 1
            if self.calls == self.fail_on_call:
                k = int(np.flatnonzero(passed.ravel())[0])
                passed.flat[k] -= 1
                failed.flat[k] += 1
        return ExecutionResult(passed, failed)


def _execute(executor: TestExecutor, additional: TestAllocation, cycle: int):
    if additional.total == 0:
        return
    result = executor.execute(additional)
    if not np.array_equal(np.asarray(result.passed) + np.asarray(result.failed), additional.tests):
        raise InvalidParameterError("executor did not report every requested test exactly once")
    n_failed = int(np.asarray(result.failed).sum())
    if n_failed:
        raise TestFailureError(cycle, n_failed)


# --- loop state ----------------------------------------------------------------

@dataclass(frozen=True)
class LoopState:
    """Loop state between cycles.

    ``planned_profile`` is the profile the current allocation was last planned
    for; the maintain strategy only moves it when it actually re-plans.
    """

    cycle: int
    counts: OccurrenceCounts
    profile: OperationalProfile
    planned_profile: OperationalProfile
    allocation: TestAllocation
    initial_profile: OperationalProfile
    initial_allocation: TestAllocation
    history: tuple[CycleRecord, ...] = field(default=(), repr=False)

    @classmethod
    def start(cls, counts: OccurrenceCounts, allocation: TestAllocation) -> "LoopState":
        profile = derive_profile(counts)
        return cls(0, counts, profile, profile, allocation, profile, allocation)

    @property
    def tests_total(self) -> int:
        return self.history[-1].tests_total if self.history else self.allocation.total


def initial_allocation(profile: OperationalProfile, hazards: Sequence[HazardScenario], ub: float) -> TestAllocation:
    """Release-time allocation: fewest tests with risk <= ub on the initial profile."""
    return allocator.allocate_min_tests(profile, hazards, ub)


def _advance(state: LoopState, counts, profile, planned, added: np.ndarray, hazards) -> LoopState:
    allocation = TestAllocation(state.allocation.tests + added)
    p, w = profile.probabilities, hazard_weights(hazards)
    n_added = int(added.sum())
    record = CycleRecord(
        cycle=state.cycle,
        delta_to_initial=profile_delta(profile, state.initial_profile),
        risk_controlled=risk_value(p, w, allocation.tests),
        risk_uncontrolled=risk_value(p, w, state.initial_allocation.tests),
        tests_added=n_added,
        tests_total=state.tests_total + n_added,
    )
    log.debug("cycle %d: risk %.6g (uncontrolled %.6g), +%d tests",
              record.cycle, record.risk_controlled, record.risk_uncontrolled, n_added)
    return replace(
        state,
        cycle=state.cycle + 1,
        counts=counts,
        profile=profile,
        planned_profile=planned,
        allocation=allocation,
        history=state.history + (record,),
    )


def run_cycle_maintain(state: LoopState, updates: OccurrenceCounts, hazards, ub: float,
                       executor: TestExecutor) -> LoopState:
    counts, new_p = update_profile(state.counts, updates)
    p, w = new_p.probabilities, hazard_weights(hazards)
    added = np.zeros(state.allocation.shape, dtype=np.int64)
    planned = state.planned_profile
    if risk_value(p, w, state.allocation.tests) > ub:
        extra = allocator.solve_required_tests(planned, new_p, hazards, state.allocation, ub)
        _execute(executor, extra, state.cycle)
        added = extra.tests
        planned = new_p
    return _advance(state, counts, new_p, planned, added, hazards)


def run_cycle_minimize(state: LoopState, updates: OccurrenceCounts, hazards, m: int,
                       executor: TestExecutor) -> LoopState:
    counts, new_p = update_profile(state.counts, updates)
    extra = allocator.solve_additional_min_risk(state.planned_profile, new_p, hazards, state.allocation, m)
    _execute(executor, extra, state.cycle)
    return _advance(state, counts, new_p, new_p, extra.tests, hazards)


def run_cycle_combined(state: LoopState, updates: OccurrenceCounts, hazards, ub: float, m: int,
                       executor: TestExecutor) -> LoopState:
    counts, new_p = update_profile(state.counts, updates)
    budgeted = allocator.solve_additional_min_risk(state.planned_profile, new_p, hazards, state.allocation, m)
    after_budget = state.allocation + budgeted
    added = budgeted.tests
    if risk_value(new_p.probabilities, hazard_weights(hazards), after_budget.tests) > ub:
        top_up = allocator.solve_required_tests(state.planned_profile, new_p, hazards, after_budget, ub)
        added = added + top_up.tests
    _execute(executor, TestAllocation(added), state.cycle)
    return _advance(state, counts, new_p, new_p, added, hazards)


def run_cycle(state: LoopState, updates: OccurrenceCounts, hazards, config: StrategyConfig,
              executor: TestExecutor) -> LoopState:
    if config.kind == "maintain":
        return run_cycle_maintain(state, updates, hazards, config.ub, executor)
    if config.kind == "minimize":
        return run_cycle_minimize(state, updates, hazards, config.budget, executor)
    return run_cycle_combined(state, updates, hazards, config.ub, config.budget, executor)


def run_loop(config: StrategyConfig, initial_counts: OccurrenceCounts, updates: Iterable[OccurrenceCounts],
             hazards: Sequence[HazardScenario], *, ub: float | None = None,
             executor: TestExecutor | None = None) -> LoopState:
    """Drive the loop over an update stream.

    The release allocation is planned against ``ub`` (defaults to the
    strategy's own bound).
    """
    ub = config.ub if ub is None else ub
    if ub is None or not ub > 0:
        raise InvalidParameterError("a positive ub is needed to plan the release allocation")
    executor = executor or PassingExecutor()
    profile = derive_profile(initial_counts)
    state = LoopState.start(initial_counts, initial_allocation(profile, hazards, ub))
    for batch in updates:
        state = run_cycle(state, batch, hazards, config, executor)
    return state


# --- experiments ---------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSetup:
    """Everything about an experiment that does not depend on the strategy."""

    source: GroundTruthProfile
    target: GroundTruthProfile
    drift: DriftSchedule
    initial_counts: OccurrenceCounts
    seed: int
    samples_per_cycle: int

    @property
    def initial_profile(self) -> OperationalProfile:
        return derive_profile(self.initial_counts)

    def updates(self, cycles: int) -> Iterator[OccurrenceCounts]:
        for t in range(cycles):
            yield sample_cycle(self.source, self.target, self.drift.r(t), self.samples_per_cycle,
                               stream(self.seed, "cycle", t))


def prepare_experiment(
    drift: DriftSchedule,
    seed: int,
    *,
    n_bins: int = DEFAULT_BINS,
    source: GroundTruthProfile | None = None,
    target: GroundTruthProfile | None = None,
    samples_per_cycle: int = DEFAULT_SAMPLES_PER_CYCLE,
    initial_samples: int | None = None,
) -> ExperimentSetup:
    """Build ground truths and release-time counts.

    By default the release profile is the source ground truth itself; pass
    ``initial_samples`` to start from a finite sample of it instead.
    """
    if samples_per_cycle < 0 or (initial_samples is not None and initial_samples <= 0):
        raise InvalidParameterError("samples_per_cycle >= 0 and initial_samples > 0 are required")
    if source is None:
        source = generate_ground_truth(DEFAULT_SOURCE, n_bins, stream(seed, "source"), label="source")
    if target is None:
        target = generate_ground_truth(DEFAULT_SOURCE, len(source), stream(seed, "target"), label="target")
    if initial_samples is None:
        initial = source.counts
        if initial is None:
            initial = OccurrenceCounts(np.rint(source.profile.probabilities * 1e6))
    else:
        initial = sample_cycle(source, target, 0.0, initial_samples, stream(seed, "initial"))
    return ExperimentSetup(source, target, drift, initial, int(seed), samples_per_cycle)


def run_experiment(
    config: StrategyConfig,
    drift: DriftSchedule,
    hazards: Sequence[HazardScenario],
    cycles: int,
    seed: int,
    *,
    setup: ExperimentSetup | None = None,
    ub: float | None = None,
    executor: TestExecutor | None = None,
    **setup_kwargs,
) -> list[CycleRecord]:
    """One record per cycle, including the frozen-allocation counterfactual risk."""
    if cycles <= 0:
        raise InvalidParameterError("cycles must be positive")
    setup = setup or prepare_experiment(drift, seed, **setup_kwargs)
    state = run_loop(config, setup.initial_counts, setup.updates(cycles), hazards, ub=ub, executor=executor)
    return list(state.history)
