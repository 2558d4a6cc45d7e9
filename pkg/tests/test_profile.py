import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskalloc.errors import DimensionError, EmptyProfileError
from riskalloc.profile import (
    OccurrenceCounts,
    OperationalProfile,
    aggregate_updates,
    derive_profile,
    profile_delta,
    update_profile,
)


def counts_lists(n):
    return st.lists(st.integers(0, 10**6), min_size=n, max_size=n)


class TestDeriveProfile:
    def test_ratio(self):
        np.testing.assert_array_equal(derive_profile(OccurrenceCounts([3, 1])).probabilities, [0.75, 0.25])

    def test_degenerate_mass(self):
        np.testing.assert_array_equal(derive_profile(OccurrenceCounts([5, 0, 0])).probabilities, [1, 0, 0])

    def test_uniform(self):
        np.testing.assert_array_equal(derive_profile(OccurrenceCounts([1, 1, 1, 1])).probabilities, [0.25] * 4)

    def test_zero_total_is_empty(self):
        with pytest.raises(EmptyProfileError):
            derive_profile(OccurrenceCounts([0, 0]))

    @given(counts_lists(6).filter(lambda c: sum(c) > 0))
    def test_sums_to_one(self, counts):
        p = derive_profile(OccurrenceCounts(counts)).probabilities
        assert abs(p.sum() - 1.0) <= 1e-12
        assert (p >= 0).all()


class TestCountsValidation:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            OccurrenceCounts([1, -1])

    def test_fractional_rejected(self):
        with pytest.raises(ValueError):
            OccurrenceCounts([1.5, 1])

    def test_read_only(self):
        c = OccurrenceCounts([1, 2])
        with pytest.raises(ValueError):
            c.counts[0] = 5

    def test_profile_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            OperationalProfile([1.5, -0.5])

    def test_profile_not_normalised_rejected(self):
        with pytest.raises(ValueError):
            OperationalProfile([0.5, 0.4])


class TestUpdateProfile:
    def test_symmetric_merge(self):
        merged, p = update_profile(OccurrenceCounts([3, 1]), OccurrenceCounts([1, 3]))
        assert merged == OccurrenceCounts([4, 4])
        np.testing.assert_array_equal(p.probabilities, [0.5, 0.5])

    def test_zero_updates_keep_profile(self):
        base = OccurrenceCounts([7, 2, 1])
        merged, p = update_profile(base, OccurrenceCounts.zeros(3))
        assert merged == base
        assert p == derive_profile(base)

    def test_update_from_empty(self):
        _, p = update_profile(OccurrenceCounts([0, 0]), OccurrenceCounts([2, 6]))
        np.testing.assert_array_equal(p.probabilities, [0.25, 0.75])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            update_profile(OccurrenceCounts([1, 2]), OccurrenceCounts([1, 2, 3]))


class TestAggregateUpdates:
    def test_elementwise_sum(self):
        assert aggregate_updates([OccurrenceCounts([1, 0]), OccurrenceCounts([0, 2])]) == OccurrenceCounts([1, 2])

    def test_empty_batch(self):
        assert aggregate_updates([], n_bins=3) == OccurrenceCounts.zeros(3)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            aggregate_updates([OccurrenceCounts([1]), OccurrenceCounts([1, 2])])

    @given(st.lists(counts_lists(4), min_size=1, max_size=6), st.randoms(use_true_random=False))
    def test_order_independent(self, batch, rnd):
        shuffled = list(batch)
        rnd.shuffle(shuffled)
        a = aggregate_updates([OccurrenceCounts(c) for c in batch])
        b = aggregate_updates([OccurrenceCounts(c) for c in shuffled])
        assert a == b


class TestProfileDelta:
    def test_identity(self):
        p = OperationalProfile([0.2, 0.8])
        assert profile_delta(p, p) == 0.0

    def test_disjoint_support(self):
        assert profile_delta(OperationalProfile([1, 0]), OperationalProfile([0, 1])) == 2.0

    def test_arithmetic(self):
        assert profile_delta(OperationalProfile([0.75, 0.25]), OperationalProfile([0.5, 0.5])) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            profile_delta(OperationalProfile([1.0]), OperationalProfile([0.5, 0.5]))


def check_profile_identities(rng: np.random.Generator, n_cases: int) -> int:
    """Algebraic identities of the update machinery and the delta metric axioms.

    Returns the number of cases checked; any violation raises AssertionError.
    """
    for _ in range(n_cases):
        n = int(rng.integers(1, 9))
        base = OccurrenceCounts(rng.integers(0, 50, n) + (np.arange(n) == 0))
        batch = [OccurrenceCounts(rng.integers(0, 50, n)) for _ in range(int(rng.integers(0, 5)))]
        agg = aggregate_updates(batch, n_bins=n)
        # one aggregated update equals applying the batch sequentially
        merged, p_once = update_profile(base, agg)
        seq = base
        for u in batch:
            seq, p_seq = update_profile(seq, u)
        assert merged == seq
        assert p_once == derive_profile(seq)
        # order of the batch does not matter
        perm = [batch[i] for i in rng.permutation(len(batch))]
        assert aggregate_updates(perm, n_bins=n) == agg
        # zero update is neutral, merged counts are the plain sum
        assert update_profile(base, OccurrenceCounts.zeros(n))[0] == base
        np.testing.assert_array_equal(merged.counts, base.counts + agg.counts)
        # delta is a metric (L1) on profiles
        a, b, c = (OperationalProfile(rng.dirichlet(np.ones(n))) for _ in range(3))
        dab, dba = profile_delta(a, b), profile_delta(b, a)
        assert profile_delta(a, a) == 0.0
        assert dab == dba and dab >= 0.0
        assert dab <= 2.0 + 1e-12
        assert profile_delta(a, c) <= dab + profile_delta(b, c) + 1e-12
        if dab == 0.0:
            np.testing.assert_array_equal(a.probabilities, b.probabilities)
    return n_cases


class TestIdentities:
    def test_random_cases(self):
        assert check_profile_identities(np.random.default_rng(7), 500) == 500

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8).filter(lambda v: sum(v) > 0.1),
           st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8).filter(lambda v: sum(v) > 0.1))
    def test_delta_bounded(self, u, v):
        n = min(len(u), len(v))
        a = OperationalProfile(np.array(u[:n]) / sum(u[:n])) if sum(u[:n]) > 0 else None
        b = OperationalProfile(np.array(v[:n]) / sum(v[:n])) if sum(v[:n]) > 0 else None
        if a is None or b is None:
            return
        assert 0.0 <= profile_delta(a, b) <= 2.0 + 1e-12
