"""
Scanner Warehouse

Aggregates validated transactions into consumer x category x month cells and
builds one monthly budget dataset per consumer. Population-level category
prices are computed in duckdb; everything else stays in polars.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import duckdb
import polars as pl
import yaml

from choice_consistency.choice_data import ChoiceDataset, make_dataset
from choice_consistency.config.constants import EtlConfig, Paths
from choice_consistency.config.data_schemas import MONTHLY_CELL_SCHEMA, validate_schema
from choice_consistency.data_access import write_dataset
from choice_consistency.utils.error_handling import DataValidationError, UsageError, log_performance

logger = logging.getLogger(__name__)


@dataclass
class EtlReport:
    """Summary written next to the ETL outputs."""
    rows_read: int = 0
    parse_errors: int = 0
    dropped_zero_rows: int = 0
    consumers_in: int = 0
    consumers_out: int = 0
    months_covered: List[str] = field(default_factory=list)
    excluded_consumers: List[str] = field(default_factory=list)
    partitions: Dict[str, int] = field(default_factory=dict)
    price_index: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def load_run_config(config_path: Optional[Path] = None) -> Dict:
    """Read a YAML run configuration; a missing default file means no overrides."""
    path = Path(config_path) if config_path is not None else Paths.DEFAULT_CONFIG
    if not path.exists():
        if config_path is not None:
            raise UsageError("config", "load", f"config file not found: {path}")
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise UsageError("config", "load", f"invalid YAML in {path}: {e}", original_error=e) from e
    if not isinstance(loaded, dict):
        raise UsageError("config", "load", f"{path} must hold a key/value mapping")
    return loaded


def month_key(value: date) -> str:
    return f"{value.year:04d}-{value.month:02d}"


def months_between(start: date, end: date) -> List[str]:
    """Every YYYY-MM key from start to end inclusive."""
    months = []
    year, month = start.year, start.month
    while (year, month) <= (end.year, end.month):
        months.append(f"{year:04d}-{month:02d}")
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)
    return months


class ScannerWarehouse:
    """In-memory transaction store with duckdb access for population aggregates."""

    def __init__(self, records: pl.DataFrame):
        self.records = records.with_columns(
            pl.col("timestamp").dt.strftime("%Y-%m").alias("month")
        )

    def get_duckdb_connection(self) -> duckdb.DuckDBPyConnection:
        conn = duckdb.connect()
        conn.register("transactions", self.records.select(
            "membership_id", "category", "month", "quantity_kg", "expenditure", "shelf_expenditure",
        ).to_arrow())
        return conn

    def population_prices(self, basis: str = "final") -> pl.DataFrame:
        """Category x month price over all consumers: total spending over total quantity."""
        spending = "COALESCE(shelf_expenditure, expenditure)" if basis == "shelf" else "expenditure"
        with self.get_duckdb_connection() as conn:
            return conn.execute(
                f"""
                SELECT category, month,
                       SUM(quantity_kg) AS quantity,
                       SUM({spending}) / SUM(quantity_kg) AS price
                FROM transactions
                WHERE quantity_kg > 0
                GROUP BY category, month
                ORDER BY category, month
                """
            ).pl()

    def aggregate_price_index(self, category: str, month: str) -> float:
        with self.get_duckdb_connection() as conn:
            quantity, spent = conn.execute(
                """
                SELECT COALESCE(SUM(quantity_kg), 0), COALESCE(SUM(expenditure), 0)
                FROM transactions
                WHERE category = ? AND month = ?
                """,
                [category, month],
            ).fetchone()
        if quantity <= 0:
            raise DataValidationError("scanner_etl", "aggregate_price_index",
                                      f"no quantity for {category} in {month}")
        return float(spent / quantity)


def aggregate_price_index(records: pl.DataFrame, category: str, month: str) -> float:
    """Population price of one category-month (month as YYYY-MM)."""
    return ScannerWarehouse(records).aggregate_price_index(category, month)


def monthly_cells(records: pl.DataFrame, categories: Sequence[str], window: Tuple[date, date],
                  price_basis: str = "final") -> pl.DataFrame:
    """Consumer x category x month cells with Q = sum of quantities and P = spending / Q."""
    if price_basis not in EtlConfig.PRICE_BASES:
        raise UsageError("scanner_etl", "monthly_aggregate",
                         f"price basis must be one of {EtlConfig.PRICE_BASES}, got '{price_basis}'")
    start, end = month_key(window[0]), month_key(window[1])
    warehouse = ScannerWarehouse(records)
    scoped = warehouse.records.filter(
        pl.col("category").is_in(list(categories))
        & (pl.col("month") >= start) & (pl.col("month") <= end)
        & (pl.col("quantity_kg") > 0)
    )
    spending = (pl.coalesce(pl.col("shelf_expenditure"), pl.col("expenditure"))
                if price_basis == "shelf" else pl.col("expenditure"))
    cells = (
        scoped.group_by(["membership_id", "month", "category"])
        .agg(pl.col("quantity_kg").sum().alias("quantity"), spending.sum().alias("spent"))
        .with_columns((pl.col("spent") / pl.col("quantity")).alias("price"))
        .drop("spent")
    )
    if price_basis == "population":
        population = ScannerWarehouse(scoped.drop("month")).population_prices("final")
        cells = cells.drop("price").join(
            population.select("category", "month", "price"), on=["category", "month"], how="left")
    cells = validate_schema(cells, MONTHLY_CELL_SCHEMA, source_name="monthly_cells")
    return cells.sort(["membership_id", "month", "category"])


@log_performance("monthly_aggregate")
def monthly_aggregate(records: pl.DataFrame, categories: Sequence[str], window: Tuple[date, date],
                      price_basis: str = "final") -> Dict[str, ChoiceDataset]:
    """
    One dataset per consumer, one observation per month in which every requested
    category was bought. Observation ids are YYYY-MM months in calendar order.
    """
    categories = list(categories)
    cells = monthly_cells(records, categories, window, price_basis)
    datasets: Dict[str, ChoiceDataset] = {}
    for (consumer,), frame in cells.group_by(["membership_id"], maintain_order=True):
        wide = frame.pivot(on="category", index="month", values=["quantity", "price"])
        quantity_columns = [f"quantity_{c}" for c in categories]
        price_columns = [f"price_{c}" for c in categories]
        if not all(c in wide.columns for c in quantity_columns):
            continue
        complete = wide.drop_nulls(subset=quantity_columns + price_columns).sort("month")
        if complete.height == 0:
            continue
        rows = list(zip(complete.select(price_columns).to_numpy(),
                        complete.select(quantity_columns).to_numpy()))
        datasets[str(consumer)] = make_dataset(rows, label=str(consumer),
                                               obs_ids=complete["month"].to_list())
    logger.info(f"Built {len(datasets)} consumer datasets over {categories}")
    return dict(sorted(datasets.items()))


def _month_index(month: str) -> int:
    year, mon = month.split("-")
    return int(year) * 12 + int(mon) - 1


def _first_run(months: List[int], months_required: int, window_start: Optional[int]) -> Optional[int]:
    """Position where the qualifying run starts, or None."""
    if window_start is not None:
        if window_start not in months:
            return None
        start = months.index(window_start)
        span = months[start:start + months_required]
        return start if span == list(range(window_start, window_start + months_required)) else None
    start = 0
    for k in range(len(months)):
        if k > 0 and months[k] != months[k - 1] + 1:
            start = k
        if k - start + 1 == months_required:
            return start
    return None


def filter_consecutive(datasets: Dict[str, ChoiceDataset], months_required: int,
                       window_start: Optional[str] = None) -> Tuple[Dict[str, ChoiceDataset], List[str]]:
    """
    Keep consumers covering months_required consecutive months and truncate them to that span.

    With window_start (YYYY-MM) the span must begin at that month; without it the
    earliest qualifying run is used. Returns (kept, excluded labels).
    """
    if months_required < 1:
        raise UsageError("scanner_etl", "filter_consecutive", "months_required must be at least 1")
    anchor = _month_index(window_start) if window_start else None
    kept: Dict[str, ChoiceDataset] = {}
    excluded: List[str] = []
    for label, ds in sorted(datasets.items()):
        found = _first_run([_month_index(m) for m in ds.obs_ids], months_required, anchor)
        if found is None:
            excluded.append(label)
            continue
        kept[label] = ds.subset(range(found, found + months_required))
    if excluded:
        logger.warning(f"Excluded {len(excluded)} consumers without {months_required} consecutive months")
    return kept, excluded


def write_datasets(datasets: Dict[str, ChoiceDataset], out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [write_dataset(ds, out_dir / f"{label}.csv") for label, ds in sorted(datasets.items())]
