"""Exception types. Every error carries a short machine-readable ``category``."""
from __future__ import annotations


class RiskAllocError(Exception):
    category = "error"


class DimensionError(RiskAllocError, ValueError):
    category = "dimension"


class EmptyProfileError(RiskAllocError, ValueError):
    category = "empty-profile"


class InvalidParameterError(RiskAllocError, ValueError):
    category = "invalid-parameter"


class InfeasibleBudgetError(RiskAllocError):
    """Tests frozen on shrunk bins already use up the whole risk budget."""

    category = "infeasible"

    def __init__(self, r_cov: float, ub: float):
        self.r_cov = r_cov
        self.ub = ub
        super().__init__(f"covered risk {r_cov!r} already reaches the upper bound {ub!r}")


class RoundingError(RiskAllocError, AssertionError):
    category = "rounding"


class TestFailureError(RiskAllocError):
    """An executed test reported a failure; the loop cannot continue."""

    __test__ = False  # not a pytest class
    category = "test-failure"

    def __init__(self, cycle: int, failed: int):
        self.cycle = cycle
        self.failed = failed
        super().__init__(f"{failed} test(s) failed in cycle {cycle}")


class ConfigError(RiskAllocError, ValueError):
    category = "config"

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class FileFormatError(RiskAllocError, ValueError):
    category = "io"
