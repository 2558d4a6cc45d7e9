"""Risk per demand under a drifting operational profile, and the test
allocations that keep it in check."""
from ._kernels import BACKEND
from .allocator import (
    AllocationBudget,
    RealAllocation,
    allocate_min_risk,
    allocate_min_tests,
    min_risk_bound,
    min_tests_bound,
    naive_round_up,
    round_min_risk,
    round_min_tests,
    solve_additional_min_risk,
    solve_additional_min_tests,
    solve_min_risk,
    solve_min_tests,
    solve_required_tests,
)
from .drift import (
    BinModel,
    DriftSchedule,
    GroundTruthProfile,
    assign_bin,
    fit_bins,
    generate_ground_truth,
    sample_cycle,
)
from .errors import (
    ConfigError,
    DimensionError,
    EmptyProfileError,
    InfeasibleBudgetError,
    RiskAllocError,
    RoundingError,
    TestFailureError,
)
from .hazard import HazardScenario, RiskReport, TestAllocation, check_upper_bound, overall_pfd, pfd, risk_per_demand
from .profile import (
    OccurrenceCounts,
    OperationalProfile,
    aggregate_updates,
    derive_profile,
    profile_delta,
    update_profile,
)
from .strategies import (
    CycleRecord,
    LoopState,
    StrategyConfig,
    run_cycle_combined,
    run_cycle_maintain,
    run_cycle_minimize,
    run_experiment,
)

__version__ = "0.1.0"
