"""
Scenario Splits

Partitions transactions by a setting-specific rule (season, year, working day,
meal time, discount) so that each part can be aggregated into its own datasets.
Every record lands in exactly one part.
"""

import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, FrozenSet, Optional

import polars as pl

from choice_consistency.config.constants import ErrorMessages, EtlConfig
from choice_consistency.utils.error_handling import DataValidationError, UsageError, error_boundary

logger = logging.getLogger(__name__)

PART_COLUMN = "_part"


@dataclass(frozen=True)
class HolidayCalendar:
    """Official holidays and make-up working days (weekend dates that are worked)."""
    holidays: FrozenSet[date] = field(default_factory=frozenset)
    workdays: FrozenSet[date] = field(default_factory=frozenset)

    @classmethod
    @error_boundary("scanner_etl", "load_calendar")
    def from_csv(cls, path: Path) -> "HolidayCalendar":
        """`date,label` rows; label `workday` marks a make-up working day, anything else a holiday."""
        frame = pl.read_csv(Path(path), infer_schema=False)
        if "date" not in frame.columns:
            raise DataValidationError(str(path), "load_calendar", "calendar needs a 'date' column")
        if "label" not in frame.columns:
            frame = frame.with_columns(pl.lit("holiday").alias("label"))
        frame = frame.with_columns(
            pl.col("date").str.strip_chars().str.strptime(pl.Date, "%Y-%m-%d", strict=False).alias("day"),
            pl.col("label").fill_null("holiday").str.strip_chars().str.to_lowercase(),
        )
        bad = frame.with_row_index("row", offset=2).filter(pl.col("day").is_null())
        if bad.height:
            line = int(bad["row"][0])
            raise DataValidationError(str(path), "load_calendar", f"unparsable date at line {line}", row=line)
        is_workday = pl.col("label") == EtlConfig.MAKEUP_WORKDAY_LABEL
        return cls(
            holidays=frozenset(frame.filter(~is_workday)["day"].to_list()),
            workdays=frozenset(frame.filter(is_workday)["day"].to_list()),
        )

    def is_working_day(self, day: date) -> bool:
        if day in self.workdays:
            return True
        return day.weekday() < 5 and day not in self.holidays

    def working_expr(self) -> pl.Expr:
        day = pl.col("timestamp").dt.date()
        weekday = pl.col("timestamp").dt.weekday() <= 5
        return _member_of(day, self.workdays) | (weekday & ~_member_of(day, self.holidays))


def _member_of(day: pl.Expr, days: FrozenSet[date]) -> pl.Expr:
    if not days:
        return pl.lit(False)
    return day.is_in(pl.Series(sorted(days), dtype=pl.Date))


def _season_expr() -> pl.Expr:
    return (
        pl.col("timestamp").dt.month().cast(pl.Int64)
        .replace_strict(EtlConfig.SEASONS, return_dtype=pl.Utf8)
    )


def _meal_expr() -> pl.Expr:
    minutes = pl.col("timestamp").dt.hour().cast(pl.Int32) * 60 + pl.col("timestamp").dt.minute().cast(pl.Int32)
    inside = pl.lit(False)
    for start, end in EtlConfig.MEAL_WINDOWS:
        inside = inside | ((minutes >= start) & (minutes < end))
    return pl.when(inside).then(pl.lit("meal")).otherwise(pl.lit("non_meal"))


def scenario_labels(records: pl.DataFrame, scenario: str,
                    calendar: Optional[HolidayCalendar] = None) -> pl.DataFrame:
    """The records with a part label column attached."""
    if scenario not in EtlConfig.SCENARIOS:
        raise UsageError("scanner_etl", "split_scenario",
                         f"scenario must be one of {EtlConfig.SCENARIOS}, got '{scenario}'")
    if scenario == "season":
        part = _season_expr()
    elif scenario == "year":
        part = pl.col("timestamp").dt.year().cast(pl.Utf8)
    elif scenario == "working_day":
        if calendar is None:
            raise UsageError("scanner_etl", "split_scenario", ErrorMessages.CALENDAR_REQUIRED)
        part = pl.when(calendar.working_expr()).then(pl.lit("working")).otherwise(pl.lit("non_working"))
    elif scenario == "meal_time":
        part = _meal_expr()
    else:
        part = pl.when(pl.col("discount_flag")).then(pl.lit("discounted")).otherwise(pl.lit("non_discounted"))
    return records.with_columns(part.alias(PART_COLUMN))


def split_scenario(records: pl.DataFrame, scenario: str,
                   calendar: Optional[HolidayCalendar] = None) -> Dict[str, pl.DataFrame]:
    """Labelled partitions of the records, in label order; empty parts are omitted."""
    labelled = scenario_labels(records, scenario, calendar)
    parts = {
        str(label): frame.drop(PART_COLUMN)
        for (label,), frame in labelled.group_by([PART_COLUMN], maintain_order=True)
    }
    logger.info(f"Split {records.height} records by {scenario}: "
                + ", ".join(f"{k}={v.height}" for k, v in sorted(parts.items())))
    return {label: parts[label].sort("line_number") for label in sorted(parts)}
