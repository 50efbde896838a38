"""
Tests for choice datasets and revealed-preference relations.
"""

import numpy as np
import pytest

from choice_consistency.choice_data import (
    closure_of,
    direct_relations,
    expenditure,
    make_dataset,
    transitive_closure,
)
from choice_consistency.utils.error_handling import DataValidationError


class TestMakeDataset:
    """Test dataset construction and validation."""

    def test_default_observation_ids(self, d_dagger):
        """Observation ids default to 1-based row numbers."""
        assert d_dagger.obs_ids == ["1", "2"]
        assert d_dagger.n_obs == 2
        assert d_dagger.n_goods == 2

    def test_custom_observation_ids(self):
        """Explicit ids are kept in order."""
        ds = make_dataset([((1, 1), (1, 2))], label="x", obs_ids=["2019-01"])
        assert ds.obs_ids == ["2019-01"]
        assert ds.label == "x"

    def test_non_positive_price_reports_row(self):
        """A zero price is rejected with its row number."""
        with pytest.raises(DataValidationError) as excinfo:
            make_dataset([((1, 1), (1, 1)), ((0, 1), (1, 1))])
        assert excinfo.value.row == 2
        assert "row 2" in excinfo.value.message

    def test_negative_quantity_rejected(self):
        """Negative quantities are invalid."""
        with pytest.raises(DataValidationError):
            make_dataset([((1, 1), (-1, 2))])

    def test_zero_bundle_rejected(self):
        """An all-zero bundle has zero expenditure."""
        with pytest.raises(DataValidationError) as excinfo:
            make_dataset([((1, 1), (0, 0))])
        assert excinfo.value.row == 1

    def test_dimension_mismatch(self):
        """Every row must have the same number of goods."""
        with pytest.raises(DataValidationError) as excinfo:
            make_dataset([((1, 1), (1, 1)), ((1, 1, 1), (1, 1, 1))])
        assert excinfo.value.row == 2

    def test_empty_dataset(self):
        """At least one observation is required."""
        with pytest.raises(DataValidationError):
            make_dataset([])

    def test_arrays_are_read_only(self, d_dagger):
        """Observations cannot be mutated in place."""
        with pytest.raises(ValueError):
            d_dagger.observations[0].prices[0] = 5.0


class TestObservation:
    """Test observation-level quantities."""

    def test_expenditure(self):
        """p=(2,1), x=(3,1) costs 7."""
        ds = make_dataset([((2, 1), (3, 1))])
        assert expenditure(ds.observations[0]) == 7.0

    def test_shares_sum_to_one(self):
        """Expenditure shares across goods sum to one."""
        ds = make_dataset([((2, 1), (3, 1))])
        shares = ds.observations[0].shares
        assert shares.sum() == pytest.approx(1.0)
        assert shares[0] == pytest.approx(6 / 7)

    def test_cost_matrix(self, d_dagger):
        """C[i, j] is the cost of bundle j at prices i."""
        np.testing.assert_allclose(d_dagger.cost_matrix(), [[2.0, 1.0], [1.0, 2.0]])


class TestRelations:
    """Test direct and transitive relations."""

    def test_mutual_strict_preference(self, d_dagger):
        """Each observation is strictly revealed preferred to the other at e=1."""
        rel = direct_relations(d_dagger, 1.0)
        assert rel.strict[0, 1] and rel.strict[1, 0]
        assert rel.weak[0, 1] and rel.weak[1, 0]

    def test_half_efficiency_only_weak(self, d_dagger):
        """At e=0.5 the cross costs sit exactly on the deflated budgets."""
        rel = direct_relations(d_dagger, 0.5)
        assert rel.weak[0, 1] and rel.weak[1, 0]
        assert not rel.strict[0, 1] and not rel.strict[1, 0]

    def test_zero_efficiency_has_no_cross_relations(self, d_dagger):
        """Nothing is affordable off the diagonal at e=0."""
        rel = direct_relations(d_dagger, 0.0)
        assert not rel.weak[0, 1] and not rel.weak[1, 0]

    def test_efficiency_out_of_range(self, d_dagger):
        """Efficiency must lie in [0, 1]."""
        with pytest.raises(DataValidationError):
            direct_relations(d_dagger, 1.5)

    def test_closure_complete(self, d_dagger):
        """Mutual relations close to the full matrix."""
        rel = transitive_closure(direct_relations(d_dagger, 1.0))
        assert rel.closure.all()

    def test_closure_of_chain(self):
        """0 -> 1 -> 2 reaches 2 from 0 but not back."""
        adjacency = np.zeros((3, 3), dtype=bool)
        adjacency[0, 1] = adjacency[1, 2] = True
        reach = closure_of(adjacency)
        assert reach[0, 2]
        assert not reach[2, 0]
        assert reach.diagonal().all()


class TestDatasetOperations:
    """Test subsetting and bundle replacement."""

    def test_subset_order(self, triangle_dataset):
        """Subsets follow the index order given."""
        sub = triangle_dataset.subset([2, 0])
        assert sub.obs_ids == ["3", "1"]

    def test_with_bundles_keeps_budgets(self, d_dagger):
        """New bundles on the same prices."""
        replaced = d_dagger.with_bundles(np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(replaced.prices, d_dagger.prices)
        assert replaced.obs_ids == d_dagger.obs_ids
        assert not replaced.equals(d_dagger)
        assert d_dagger.equals(d_dagger.subset([0, 1]))


class TestRelationProperties:
    """Properties that hold on every dataset."""

    def test_relations_grow_with_efficiency(self, random_instances):
        levels = [0.0, 0.3, 0.5, 0.75, 0.9, 1.0]
        for ds in random_instances:
            previous = direct_relations(ds, levels[0])
            for e in levels[1:]:
                current = direct_relations(ds, e)
                assert not (previous.weak & ~current.weak).any(), ds.label
                assert not (previous.strict & ~current.strict).any(), ds.label
                previous = current

    def test_closure_is_idempotent(self, random_instances):
        for ds in random_instances:
            reach = closure_of(direct_relations(ds, 1.0).weak)
            np.testing.assert_array_equal(closure_of(reach), reach)

    def test_relations_ignore_units(self, d_dagger, on_budget_dataset):
        """Rescaling prices and quantities leaves every relation unchanged."""
        for ds in (d_dagger, on_budget_dataset):
            scaled = make_dataset(list(zip(ds.prices * 1e-5, ds.bundles * 1e-5)))
            for e in (0.5, 1.0):
                original, rescaled = direct_relations(ds, e), direct_relations(scaled, e)
                np.testing.assert_array_equal(rescaled.weak, original.weak)
                np.testing.assert_array_equal(rescaled.strict, original.strict)

    def test_tolerance_scales_with_budget(self):
        """A cross cost just above the budget counts as affordable within the relative band."""
        ds = make_dataset([((1, 1), (500, 500)), ((1, 1), (500, 500.0000005))])
        rel = direct_relations(ds, 1.0)
        assert rel.weak[0, 1]
        assert not rel.strict[1, 0]
