"""
Tests for GARP verdicts, violation enumeration and Afriat numbers.
"""

import numpy as np
import pytest

from choice_consistency.services.garp_engine import (
    afriat_numbers,
    check_garp,
    pairwise_violation_proportion,
    season_violation_table,
    violation_two_cycles,
)
from choice_consistency.tests import oracles
from choice_consistency.tests.conftest import ces_dataset
from choice_consistency.utils.error_handling import DataValidationError


class TestCheckGarp:
    """Test the GARP verdict."""

    def test_d_dagger_fails(self, d_dagger):
        """Both ordered pairs violate."""
        report = check_garp(d_dagger)
        assert not report.passes
        assert set(report.violating_pairs) == {(1, 2), (2, 1)}
        assert report.two_cycles == ((1, 2),)

    def test_d_dagger_passes_at_half(self, d_dagger):
        """Deflating budgets by half removes the strict relations."""
        assert check_garp(d_dagger, 0.5).passes

    def test_price_preference_fixture_passes(self, gapp_dataset):
        """Only one direction of revealed preference exists."""
        assert check_garp(gapp_dataset).passes

    def test_single_observation(self):
        """A single observation is always consistent."""
        ds = ces_dataset(n_rounds=1)
        assert check_garp(ds).passes

    def test_ces_chooser_passes(self):
        """Exact CES demand is rationalizable."""
        assert check_garp(ces_dataset()).passes

    def test_matches_path_oracle(self, random_instances):
        """Verdicts agree with a path-search oracle."""
        for ds in random_instances:
            assert check_garp(ds).passes == oracles.garp_passes(ds), ds.label

    def test_to_dict(self, d_dagger):
        """Serializable report."""
        data = check_garp(d_dagger).to_dict()
        assert data['passes'] is False
        assert [1, 2] in data['violating_pairs']


class TestTwoCycles:
    """Test pairwise violation enumeration."""

    def test_d_dagger_single_cycle(self, d_dagger):
        """One 2-cycle {1, 2}."""
        assert violation_two_cycles(d_dagger) == [(1, 2)]

    def test_triangle_three_cycles(self, triangle_dataset):
        """Three mutually violating observations form three 2-cycles."""
        assert violation_two_cycles(triangle_dataset) == [(1, 2), (1, 3), (2, 3)]


class TestPairwiseViolationProportion:
    """Test cross-group violation proportions."""

    def test_single_violating_pair(self, d_dagger):
        """One pair, violating."""
        assert pairwise_violation_proportion(d_dagger, [0], [1]) == 1.0

    def test_identical_groups(self, triangle_dataset):
        """Identical groups count each unordered pair once."""
        assert pairwise_violation_proportion(triangle_dataset, [0, 1, 2], [0, 1, 2]) == 1.0

    def test_consistent_pairs(self, gapp_dataset):
        """No violations anywhere."""
        assert pairwise_violation_proportion(gapp_dataset, [0], [1]) == 0.0

    def test_overlapping_groups_rejected(self, triangle_dataset):
        """Groups must be disjoint or identical."""
        with pytest.raises(DataValidationError):
            pairwise_violation_proportion(triangle_dataset, [0, 1], [1, 2])

    def test_out_of_range_index(self, d_dagger):
        """Indices are 0-based and bounded."""
        with pytest.raises(DataValidationError):
            pairwise_violation_proportion(d_dagger, [0], [2])

    def test_season_table(self, triangle_dataset):
        """Every unordered group pair, singleton self-pairs skipped."""
        table = season_violation_table(triangle_dataset, {"a": [0], "b": [1, 2]})
        assert table == {("a", "b"): 1.0, ("b", "b"): 1.0}


class TestAfriatNumbers:
    """Test utility levels and multipliers."""

    def test_none_when_garp_fails(self, d_dagger):
        """Inconsistent data has no Afriat solution."""
        assert afriat_numbers(d_dagger) is None

    def test_inequalities_hold(self, gapp_dataset):
        """U_s <= U_t + lambda_t * p^t.(x^s - x^t) for every pair."""
        solution = afriat_numbers(gapp_dataset)
        assert solution is not None
        costs, budgets = gapp_dataset.cost_matrix(), gapp_dataset.expenditures
        u, lam = np.array(solution.utilities), np.array(solution.multipliers)
        for s in range(2):
            for t in range(2):
                assert u[s] <= u[t] + lam[t] * (costs[t, s] - budgets[t]) + 1e-6
        assert np.all(lam >= 1.0 - 1e-9)

    def test_utility_reproduces_levels(self):
        """The Afriat utility of each chosen bundle equals its level."""
        ds = ces_dataset(n_rounds=8)
        solution = afriat_numbers(ds)
        assert solution is not None
        for t, obs in enumerate(ds.observations):
            assert solution.utility(ds, obs.bundle) == pytest.approx(solution.utilities[t], abs=1e-6)
