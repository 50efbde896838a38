"""
Tests for monthly budget construction from transaction logs.
"""

import json
from datetime import date

import polars as pl
import pytest

from choice_consistency.choice_data import make_dataset
from choice_consistency.config.constants import Paths
from choice_consistency.pipelines.ingest_transactions import parse_transactions
from choice_consistency.pipelines.scanner_warehouse import (
    EtlReport,
    aggregate_price_index,
    filter_consecutive,
    load_run_config,
    monthly_aggregate,
    monthly_cells,
    months_between,
    write_datasets,
)
from choice_consistency.pipelines.scenario_split import split_scenario
from choice_consistency.utils.error_handling import DataValidationError, UsageError

YEAR_2019 = (date(2019, 1, 1), date(2019, 12, 1))

TWO_CONSUMERS = """membership_id,store_id,timestamp,category,quantity_kg,expenditure,shelf_expenditure
c1,A1,2019-04-02 10:00:00,Meat,1,5,6
c2,A1,2019-04-03 10:00:00,Meat,3,25,
c1,A1,2019-04-04 10:00:00,Fruit,2,4,
c1,A1,2019-05-04 10:00:00,Meat,2,12,
c1,A1,2019-05-05 10:00:00,Fruit,1,3,
c1,A1,2019-06-05 10:00:00,Fruit,1,3,
"""


@pytest.fixture
def two_consumers(write_csv):
    return parse_transactions(write_csv("tx.csv", TWO_CONSUMERS)).frame


class TestMonthlyCells:

    def test_sample_log(self, sample_transactions_csv):
        records = parse_transactions(sample_transactions_csv).frame
        cells = monthly_cells(records, ["Meat"], YEAR_2019)
        assert cells.select("month", "category", "quantity", "price").rows() == [
            ("2019-04", "Meat", 1.5, 30.0),
            ("2019-09", "Meat", 2.0, 20.0),
        ]

    def test_window_bounds(self, sample_transactions_csv):
        records = parse_transactions(sample_transactions_csv).frame
        cells = monthly_cells(records, ["Meat", "Vegetable"], (date(2019, 9, 1), date(2019, 10, 1)))
        assert cells["month"].to_list() == ["2019-09", "2019-10"]

    def test_shelf_basis(self, two_consumers):
        cells = monthly_cells(two_consumers, ["Meat"], YEAR_2019, price_basis="shelf")
        prices = {(r["membership_id"], r["month"]): r["price"] for r in cells.to_dicts()}
        assert prices[("c1", "2019-04")] == pytest.approx(6.0)
        assert prices[("c2", "2019-04")] == pytest.approx(25 / 3)

    def test_population_basis(self, two_consumers):
        cells = monthly_cells(two_consumers, ["Meat"], YEAR_2019, price_basis="population")
        april = cells.filter(cells["month"] == "2019-04")
        assert april["price"].to_list() == pytest.approx([7.5, 7.5])
        assert april["quantity"].to_list() == [1.0, 3.0]

    def test_unknown_basis(self, two_consumers):
        with pytest.raises(UsageError):
            monthly_cells(two_consumers, ["Meat"], YEAR_2019, price_basis="list")


class TestPriceIndex:

    def test_pooled_over_consumers(self, two_consumers):
        assert aggregate_price_index(two_consumers, "Meat", "2019-04") == pytest.approx(7.5)

    def test_empty_cell(self, two_consumers):
        with pytest.raises(DataValidationError):
            aggregate_price_index(two_consumers, "Meat", "2019-12")


class TestMonthlyAggregate:

    def test_months_with_every_category(self, two_consumers):
        datasets = monthly_aggregate(two_consumers, ["Meat", "Fruit"], YEAR_2019)
        assert list(datasets) == ["c1"]
        ds = datasets["c1"]
        assert ds.obs_ids == ["2019-04", "2019-05"]
        assert ds.prices.tolist() == [[5.0, 2.0], [6.0, 3.0]]
        assert ds.bundles.tolist() == [[1.0, 2.0], [2.0, 1.0]]

    def test_single_category(self, sample_transactions_csv):
        records = parse_transactions(sample_transactions_csv).frame
        ds = monthly_aggregate(records, ["Meat"], YEAR_2019)["a1"]
        assert ds.n_goods == 1
        assert ds.obs_ids == ["2019-04", "2019-09"]

    def test_write_datasets(self, tmp_path, two_consumers):
        paths = write_datasets(monthly_aggregate(two_consumers, ["Meat", "Fruit"], YEAR_2019), tmp_path)
        assert [p.name for p in paths] == ["c1.csv"]
        assert paths[0].read_text(encoding="utf-8").startswith("obs_id,p1,p2,x1,x2\n2019-04,")

    def test_row_order_does_not_matter(self, two_consumers):
        expected = monthly_aggregate(two_consumers, ["Meat", "Fruit"], YEAR_2019)
        for seed in (1, 2, 3):
            shuffled = two_consumers.sample(fraction=1.0, shuffle=True, seed=seed)
            result = monthly_aggregate(shuffled, ["Meat", "Fruit"], YEAR_2019)
            assert list(result) == list(expected)
            assert all(result[label].equals(expected[label]) for label in expected)

    @pytest.mark.parametrize("scenario", ["season", "meal_time", "discount"])
    def test_partitions_add_up_to_whole(self, two_consumers, scenario):
        """Quantities summed over scenario parts reproduce the unsplit cells."""
        keys = ["membership_id", "month", "category"]
        whole = monthly_cells(two_consumers, ["Meat", "Fruit"], YEAR_2019).select(*keys, "quantity")
        parts = split_scenario(two_consumers, scenario)
        assert sum(frame.height for frame in parts.values()) == two_consumers.height
        pooled = (
            pl.concat([monthly_cells(frame, ["Meat", "Fruit"], YEAR_2019) for frame in parts.values()])
            .group_by(keys)
            .agg(pl.col("quantity").sum())
        )
        assert pooled.sort(keys).rows() == whole.sort(keys).rows()


class TestConsecutiveMonths:

    @staticmethod
    def dataset(months):
        return make_dataset([((1, 1), (1, 1))] * len(months), label="c", obs_ids=months)

    def test_keeps_earliest_run(self):
        datasets = {"c": self.dataset(["2019-01", "2019-03", "2019-04", "2019-05", "2019-06"])}
        kept, excluded = filter_consecutive(datasets, 3)
        assert kept["c"].obs_ids == ["2019-03", "2019-04", "2019-05"]
        assert excluded == []

    def test_anchored_at_window_start(self):
        """With a window start the span must begin at that month."""
        datasets = {
            "a": self.dataset(["2019-01", "2019-02", "2019-03", "2019-04"]),
            "b": self.dataset(["2019-02", "2019-03", "2019-04"]),
            "c": self.dataset(["2019-01", "2019-03", "2019-04", "2019-05"]),
        }
        kept, excluded = filter_consecutive(datasets, 3, window_start="2019-01")
        assert kept["a"].obs_ids == ["2019-01", "2019-02", "2019-03"]
        assert excluded == ["b", "c"]

    def test_anchor_ignores_later_runs(self):
        datasets = {"c": self.dataset(["2019-01", "2019-03", "2019-04", "2019-05", "2019-06"])}
        kept, excluded = filter_consecutive(datasets, 3, window_start="2019-01")
        assert kept == {}
        assert excluded == ["c"]

    def test_year_boundary(self):
        kept, _ = filter_consecutive({"c": self.dataset(["2018-12", "2019-01"])}, 2)
        assert kept["c"].n_obs == 2

    def test_excludes_short_runs(self):
        kept, excluded = filter_consecutive({"c": self.dataset(["2019-01", "2019-03"])}, 2)
        assert kept == {}
        assert excluded == ["c"]

    def test_invalid_requirement(self):
        with pytest.raises(UsageError):
            filter_consecutive({}, 0)

    def test_months_between(self):
        assert months_between(date(2018, 11, 1), date(2019, 2, 1)) == [
            "2018-11", "2018-12", "2019-01", "2019-02"]


class TestRunConfig:

    def test_missing_default_is_empty(self, tmp_path, monkeypatch):
        monkeypatch.setattr(Paths, "DEFAULT_CONFIG", tmp_path / "absent.yaml")
        assert load_run_config() == {}

    def test_missing_explicit_file(self, tmp_path):
        with pytest.raises(UsageError, match="not found"):
            load_run_config(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, write_csv):
        with pytest.raises(UsageError, match="YAML"):
            load_run_config(write_csv("bad.yaml", "seed: [1, 2\n"))

    def test_report_is_sorted_json(self, tmp_path):
        path = EtlReport(rows_read=4, consumers_in=1).write(tmp_path / "etl_report.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["rows_read"] == 4
        assert list(data) == sorted(data)
