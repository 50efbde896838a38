"""
Scanner Transaction Ingestion

Parses raw point-of-sale transaction logs (one row per purchased item) into a
typed, validated polars frame. Malformed rows are collected with their file
line numbers; in lenient mode the valid rows are kept and processing goes on.
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import polars as pl

from choice_consistency.config.constants import ErrorMessages, EtlConfig, Tolerances
from choice_consistency.config.data_schemas import TRANSACTION_SCHEMA, empty_frame, validate_schema
from choice_consistency.utils.error_handling import DataValidationError, error_boundary
from choice_consistency.utils.validation import create_validation_report

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransactionRecord:
    """One purchased item."""
    line_number: int
    membership_id: str
    store_id: str
    timestamp: datetime
    category: str
    quantity_kg: float
    expenditure: float
    shelf_expenditure: Optional[float]
    discount_flag: bool
    subcategory: Optional[str] = None


@dataclass
class ParseResult:
    """Valid rows plus the per-line error report."""
    frame: pl.DataFrame
    errors: List[Dict[str, Any]] = field(default_factory=list)
    rows_read: int = 0
    dropped_zero_rows: int = 0

    @property
    def records(self) -> List[TransactionRecord]:
        return [TransactionRecord(**row) for row in self.frame.to_dicts()]

    @property
    def report(self) -> str:
        return create_validation_report(self.errors)


class TransactionIngestionPipeline:
    """Validates and types one transaction CSV."""

    def __init__(self, lenient: bool = False):
        self.lenient = lenient

    def validate_header(self, df: pl.DataFrame, file_path: Path) -> None:
        missing = [c for c in EtlConfig.REQUIRED_COLUMNS if c not in df.columns]
        if missing:
            raise DataValidationError(
                str(file_path), "parse_transactions",
                ErrorMessages.MISSING_COLUMNS.format(columns=", ".join(missing)),
            )
        extra = set(df.columns) - set(EtlConfig.REQUIRED_COLUMNS) - set(EtlConfig.OPTIONAL_COLUMNS)
        if extra:
            logger.info(f"{file_path.name}: ignoring extra columns {sorted(extra)}")

    @staticmethod
    def _parse_timestamp() -> pl.Expr:
        text = pl.col("timestamp").str.strip_chars()
        return pl.coalesce([
            text.str.strptime(pl.Datetime, fmt, strict=False) for fmt in EtlConfig.TIMESTAMP_FORMATS
        ])

    @staticmethod
    def _parse_flag() -> pl.Expr:
        token = pl.col("discount_flag").str.strip_chars().str.to_lowercase()
        return (
            pl.when(token.is_in(list(EtlConfig.TRUE_TOKENS))).then(pl.lit(True))
            .when(token.is_in(list(EtlConfig.FALSE_TOKENS))).then(pl.lit(False))
            .otherwise(pl.lit(None, dtype=pl.Boolean))
        )

    def clean_and_transform(self, df: pl.DataFrame) -> pl.DataFrame:
        """Typed columns plus the raw text needed for error messages; line numbers count the header."""
        for column in EtlConfig.OPTIONAL_COLUMNS:
            if column not in df.columns:
                df = df.with_columns(pl.lit(None, dtype=pl.Utf8).alias(column))
        df = df.with_columns(pl.col(pl.Utf8).str.strip_chars())
        blank_to_null = [
            pl.when(pl.col(c).str.len_chars() == 0).then(None).otherwise(pl.col(c)).alias(c)
            for c in list(EtlConfig.REQUIRED_COLUMNS) + list(EtlConfig.OPTIONAL_COLUMNS)
        ]
        df = df.with_columns(blank_to_null)
        return df.with_row_index("line_number", offset=2).with_columns(
            pl.col("line_number").cast(pl.Int64),
            self._parse_timestamp().alias("timestamp_parsed"),
            pl.col("quantity_kg").cast(pl.Float64, strict=False).alias("quantity_parsed"),
            pl.col("expenditure").cast(pl.Float64, strict=False).alias("expenditure_parsed"),
            pl.col("shelf_expenditure").cast(pl.Float64, strict=False).alias("shelf_parsed"),
            self._parse_flag().alias("flag_parsed"),
        )

    @staticmethod
    def row_errors(row: Dict[str, Any]) -> List[str]:
        errors = []
        for column in ("membership_id", "store_id", "category"):
            if row[column] is None:
                errors.append(f"missing {column}")
        if row["timestamp_parsed"] is None:
            errors.append(f"unparsable timestamp '{row['timestamp']}'")
        quantity, spent, shelf = row["quantity_parsed"], row["expenditure_parsed"], row["shelf_parsed"]
        if quantity is None:
            errors.append(f"non-numeric quantity_kg '{row['quantity_kg']}'")
        elif quantity < 0:
            errors.append(f"negative quantity {quantity}")
        if spent is None:
            errors.append(f"non-numeric expenditure '{row['expenditure']}'")
        elif spent < 0:
            errors.append(f"negative expenditure {spent}")
        if row["shelf_expenditure"] is not None:
            if shelf is None:
                errors.append(f"non-numeric shelf_expenditure '{row['shelf_expenditure']}'")
            elif spent is not None and shelf < spent - Tolerances.RELATION:
                errors.append(f"shelf_expenditure {shelf} below expenditure {spent}")
        if row["discount_flag"] is not None and row["flag_parsed"] is None:
            errors.append(f"unrecognized discount_flag '{row['discount_flag']}'")
        return errors

    def finalize(self, df: pl.DataFrame) -> pl.DataFrame:
        """Valid rows in TRANSACTION_SCHEMA; a missing flag is inferred from shelf > final."""
        inferred = (pl.col("shelf_parsed") - pl.col("expenditure_parsed")) > Tolerances.RELATION
        frame = df.select(
            pl.col("line_number"),
            pl.col("membership_id"),
            pl.col("store_id"),
            pl.col("timestamp_parsed").alias("timestamp"),
            pl.col("category"),
            pl.col("subcategory"),
            pl.col("quantity_parsed").alias("quantity_kg"),
            pl.col("expenditure_parsed").alias("expenditure"),
            pl.col("shelf_parsed").alias("shelf_expenditure"),
            pl.coalesce(pl.col("flag_parsed"), inferred.fill_null(False)).alias("discount_flag"),
        )
        return validate_schema(frame, TRANSACTION_SCHEMA, source_name="transactions")

    def parse_file(self, file_path: Path) -> ParseResult:
        file_path = Path(file_path)
        if file_path.stat().st_size == 0:
            logger.warning(f"{file_path.name}: empty file, no transactions")
            return ParseResult(frame=empty_frame(TRANSACTION_SCHEMA))

        raw = pl.read_csv(file_path, infer_schema=False)
        self.validate_header(raw, file_path)
        if raw.height == 0:
            logger.warning(f"{file_path.name}: header only, no transactions")
            return ParseResult(frame=empty_frame(TRANSACTION_SCHEMA))

        typed = self.clean_and_transform(raw)
        invalid: List[Dict[str, Any]] = []
        bad_lines = []
        for row in typed.iter_rows(named=True):
            errors = self.row_errors(row)
            if errors:
                invalid.append({'line_number': row["line_number"], 'errors': errors})
                bad_lines.append(row["line_number"])

        if invalid and not self.lenient:
            first = invalid[0]
            raise DataValidationError(
                str(file_path), "parse_transactions",
                f"line {first['line_number']}: {'; '.join(first['errors'])} "
                f"({len(invalid)} invalid rows)",
                row=first["line_number"],
            )
        if invalid:
            logger.warning(f"{file_path.name}: skipped {len(invalid)} invalid rows\n"
                           f"{create_validation_report(invalid)}")

        valid = typed.filter(~pl.col("line_number").is_in(bad_lines)) if bad_lines else typed
        zero = (pl.col("quantity_parsed") <= 0) | (pl.col("expenditure_parsed") <= 0)
        dropped = valid.filter(zero).height
        if dropped:
            logger.warning(f"{file_path.name}: dropped {dropped} zero-quantity or zero-expenditure rows")
        frame = self.finalize(valid.filter(~zero))
        logger.info(f"{file_path.name}: {frame.height} valid transactions of {raw.height}")
        return ParseResult(frame=frame, errors=invalid, rows_read=raw.height, dropped_zero_rows=dropped)


@error_boundary("scanner_etl", "parse_transactions")
def parse_transactions(path: Path, lenient: bool = False) -> ParseResult:
    return TransactionIngestionPipeline(lenient=lenient).parse_file(Path(path))


def filter_subcategories(records: pl.DataFrame, subcategories: Optional[List[str]]) -> pl.DataFrame:
    """Keep rows whose subcategory is listed; no list keeps everything."""
    if not subcategories:
        return records
    return records.filter(pl.col("subcategory").is_in(list(subcategories)))
