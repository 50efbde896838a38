"""
Data Access Layer

Reads and writes choice datasets (CSV `obs_id,p1..pK,x1..xK` or an equivalent
JSON array), tabular outputs, and joins metric tables for cross-dataset statistics.
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List

import duckdb
import polars as pl

from choice_consistency.choice_data import ChoiceDataset, make_dataset
from choice_consistency.utils.error_handling import DataValidationError, error_boundary

logger = logging.getLogger(__name__)

DATASET_SUFFIXES = (".csv", ".json")
_PRICE_COLUMN = re.compile(r"^p(\d+)$")


def dataset_columns(n_goods: int) -> List[str]:
    return (["obs_id"] + [f"p{k}" for k in range(1, n_goods + 1)]
            + [f"x{k}" for k in range(1, n_goods + 1)])


def dataset_to_frame(ds: ChoiceDataset) -> pl.DataFrame:
    k = ds.n_goods
    prices, bundles = ds.prices, ds.bundles
    data: Dict[str, Any] = {"obs_id": ds.obs_ids}
    for j in range(k):
        data[f"p{j + 1}"] = prices[:, j].tolist()
    for j in range(k):
        data[f"x{j + 1}"] = bundles[:, j].tolist()
    return pl.DataFrame(data, schema={c: (pl.Utf8 if c == "obs_id" else pl.Float64)
                                      for c in dataset_columns(k)})


def frame_to_dataset(frame: pl.DataFrame, label: str, source: str = "dataset") -> ChoiceDataset:
    """Build a dataset from a frame with the `obs_id,p1..pK,x1..xK` layout."""
    price_columns = [c for c in frame.columns if _PRICE_COLUMN.match(c)]
    k = len(price_columns)
    expected = dataset_columns(k)
    if k == 0 or frame.columns != expected:
        raise DataValidationError(
            source, "read_dataset",
            f"header must be {','.join(expected) if k else 'obs_id,p1..pK,x1..xK'}, "
            f"got {','.join(frame.columns)}",
        )
    numeric = frame.select(
        [pl.col(c).cast(pl.Float64, strict=False) for c in expected[1:]]
    )
    null_rows = numeric.with_row_index("row").filter(pl.any_horizontal(pl.all().exclude("row").is_null()))
    if null_rows.height:
        row = int(null_rows["row"][0]) + 1
        raise DataValidationError(source, "read_dataset", f"non-numeric value at row {row}", row=row)
    matrix = numeric.to_numpy()
    rows = [(matrix[i, :k], matrix[i, k:]) for i in range(matrix.shape[0])]
    return make_dataset(rows, label=label, obs_ids=frame["obs_id"].cast(pl.Utf8).to_list())


@error_boundary("data_access", "read_dataset")
def read_dataset(path: Path) -> ChoiceDataset:
    """Read one dataset file; the label is the file stem."""
    path = Path(path)
    label = path.stem
    if path.suffix.lower() == ".json":
        records = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(records, list) or not records:
            raise DataValidationError(str(path), "read_dataset", "expected a non-empty JSON array")
        rows = [(rec["prices"], rec["bundle"]) for rec in records]
        obs_ids = [str(rec.get("obs_id", i + 1)) for i, rec in enumerate(records)]
        return make_dataset(rows, label=label, obs_ids=obs_ids)
    frame = pl.read_csv(path, infer_schema=False)
    return frame_to_dataset(frame, label=label, source=str(path))


def write_dataset(ds: ChoiceDataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".json":
        records = [obs.to_dict() for obs in ds.observations]
        path.write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
    else:
        dataset_to_frame(ds).write_csv(path)
    return path


def dataset_paths(path: Path) -> List[Path]:
    """A dataset file, or every dataset file in a directory, sorted by name."""
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in DATASET_SUFFIXES)
    if not path.exists():
        raise DataValidationError(str(path), "load_datasets", "input not found")
    return [path]


def load_datasets(path: Path) -> List[ChoiceDataset]:
    """Load datasets from a file or directory, ordered by label."""
    datasets = [read_dataset(p) for p in dataset_paths(path)]
    labels = [ds.label for ds in datasets]
    if len(set(labels)) != len(labels):
        raise DataValidationError(str(path), "load_datasets", "duplicate dataset labels")
    logger.info(f"Loaded {len(datasets)} datasets from {path}")
    return sorted(datasets, key=lambda ds: ds.label)


def write_table(frame: pl.DataFrame, path: Path, fmt: str = "csv") -> Path:
    """Write a result table as CSV or as a JSON array of row objects."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(frame.to_dicts(), indent=2) + "\n", encoding="utf-8")
    else:
        frame.write_csv(path)
    return path


@error_boundary("data_access", "read_metric_table")
def read_metric_table(path: Path) -> pl.DataFrame:
    path = Path(path)
    if path.suffix.lower() == ".json":
        frame = pl.DataFrame(json.loads(path.read_text(encoding="utf-8")))
    else:
        frame = pl.read_csv(path, schema_overrides={"label": pl.Utf8})
    if "label" not in frame.columns:
        raise DataValidationError(str(path), "read_metric_table", "metric table needs a 'label' column")
    return frame


class MetricJoiner:
    """Joins two per-consumer metric tables on label with duckdb."""

    def __init__(self, left: pl.DataFrame, right: pl.DataFrame):
        self.left = left
        self.right = right

    @staticmethod
    def _require(frame: pl.DataFrame, column: str, side: str) -> None:
        if column not in frame.columns:
            raise DataValidationError("correlate", "join", f"{side} table has no column '{column}'")

    def join(self, left_column: str, right_column: str) -> pl.DataFrame:
        """Rows present in both tables with non-null values, ordered by label."""
        self._require(self.left, left_column, "left")
        self._require(self.right, right_column, "right")
        left_metrics = self.left.select(
            pl.col("label").cast(pl.Utf8), pl.col(left_column).cast(pl.Float64).alias("value"))
        right_metrics = self.right.select(
            pl.col("label").cast(pl.Utf8), pl.col(right_column).cast(pl.Float64).alias("value"))
        with duckdb.connect() as conn:
            conn.register("left_metrics", left_metrics.to_arrow())
            conn.register("right_metrics", right_metrics.to_arrow())
            joined = conn.execute(
                """
                SELECT l.label AS label, l.value AS left_value, r.value AS right_value
                FROM left_metrics AS l
                JOIN right_metrics AS r ON l.label = r.label
                WHERE l.value IS NOT NULL AND r.value IS NOT NULL
                ORDER BY l.label
                """
            ).pl()
        logger.info(f"Joined {joined.height} labels on {left_column} / {right_column}")
        return joined


