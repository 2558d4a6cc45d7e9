import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import exact_risk
from riskalloc.errors import DimensionError
from riskalloc.hazard import (
    DEFAULT_LAMBDA,
    HazardScenario,
    RiskReport,
    TestAllocation,
    check_upper_bound,
    default_hazards,
    overall_pfd,
    pfd,
    risk_per_demand,
)
from riskalloc.profile import OperationalProfile


class TestPfd:
    @pytest.mark.parametrize("t, expected", [(0, 0.5), (998, 1e-3), (2, 0.25)])
    def test_values(self, t, expected):
        assert pfd(t) == pytest.approx(expected, rel=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            pfd(-1)

    @given(st.integers(0, 10**9))
    def test_decreasing(self, t):
        assert pfd(t + 1) < pfd(t)


class TestOverallPfd:
    def test_single_bin(self):
        assert overall_pfd(OperationalProfile([1.0]), [0]) == 0.5

    def test_mixed(self):
        assert overall_pfd(OperationalProfile([0.5, 0.5]), [0, 8]) == pytest.approx(0.3, rel=1e-15)

    def test_uniform_untested(self):
        assert overall_pfd(OperationalProfile([0.25] * 4), [0, 0, 0, 0]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            overall_pfd(OperationalProfile([1.0]), [0, 0])


class TestRiskPerDemand:
    def test_single_hazard(self):
        r = risk_per_demand(OperationalProfile([1.0]), [HazardScenario("h", 0.5, 2.0)], TestAllocation([[0]]))
        assert r.total == 0.5

    def test_two_bins(self, unit_hazard, half_half):
        assert risk_per_demand(half_half, unit_hazard, TestAllocation([[2, 2]])).total == 0.25

    def test_contributions_shape_and_sum(self):
        p = OperationalProfile([0.2, 0.3, 0.5])
        hz = [HazardScenario("a", 0.1, 2.0), HazardScenario("b", 0.3, 1.0)]
        r = risk_per_demand(p, hz, TestAllocation([[0, 1, 2], [3, 4, 5]]))
        assert r.contributions.shape == (2, 3)
        assert r.total == pytest.approx(r.contributions.sum(), rel=1e-15)

    def test_against_exact_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            p = OperationalProfile(rng.dirichlet(np.ones(3)))
            hz = [HazardScenario(f"h{e}", float(rng.uniform(0, 1)), float(rng.uniform(0.1, 5))) for e in range(2)]
            tests = rng.integers(0, 6, (2, 3))
            got = risk_per_demand(p, hz, TestAllocation(tests)).total
            want = float(exact_risk(p.probabilities, hz, tests))
            assert got == pytest.approx(want, rel=1e-14)

    def test_shape_mismatch(self, unit_hazard, half_half):
        with pytest.raises(DimensionError):
            risk_per_demand(half_half, unit_hazard, TestAllocation([[1, 2, 3]]))


class TestCheckUpperBound:
    def test_inclusive(self):
        assert check_upper_bound(RiskReport(0.25, np.zeros((1, 1))), 0.25)

    def test_exceeded(self):
        assert not check_upper_bound(RiskReport(0.25, np.zeros((1, 1))), 0.2)

    def test_zero_risk(self):
        assert check_upper_bound(0.0, 1e-30)

    def test_non_positive_ub(self):
        with pytest.raises(ValueError):
            check_upper_bound(0.0, 0.0)


class TestScenarios:
    def test_default_is_tire_blowout(self):
        (h,) = default_hazards()
        assert h.lam == DEFAULT_LAMBDA == 1.0 / (16278 * 200)
        assert h.epsilon == 1.0

    @pytest.mark.parametrize("lam, eps", [(-0.1, 1.0), (1.5, 1.0), (0.5, -1.0)])
    def test_invalid(self, lam, eps):
        with pytest.raises(ValueError):
            HazardScenario("x", lam, eps)

    def test_allocation_rejects_negative(self):
        with pytest.raises(ValueError):
            TestAllocation([[1, -1]])
