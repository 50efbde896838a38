"""
Data schema definitions for consistent data type handling.
Defines expected column types for transaction logs, monthly cells and CLI outputs.
"""

from typing import Dict

import polars as pl

from choice_consistency.utils.error_handling import DataValidationError

# Raw scanner transaction log, after parsing
TRANSACTION_SCHEMA: Dict[str, pl.DataType] = {
    'line_number': pl.Int64,
    'membership_id': pl.Utf8,
    'store_id': pl.Utf8,
    'timestamp': pl.Datetime,
    'category': pl.Utf8,
    'subcategory': pl.Utf8,
    'quantity_kg': pl.Float64,
    'expenditure': pl.Float64,
    'shelf_expenditure': pl.Float64,
    'discount_flag': pl.Boolean,
}

# One consumer x category x month aggregate
MONTHLY_CELL_SCHEMA: Dict[str, pl.DataType] = {
    'membership_id': pl.Utf8,
    'month': pl.Utf8,
    'category': pl.Utf8,
    'quantity': pl.Float64,
    'price': pl.Float64,
}

INDEX_REPORT_SCHEMA: Dict[str, pl.DataType] = {
    'label': pl.Utf8,
    'ccei': pl.Float64,
    'hmi': pl.Float64,
    'mpi': pl.Float64,
    'mci': pl.Float64,
    'hmi_kept': pl.Int64,
    'mci_exact': pl.Boolean,
    'two_cycles': pl.Int64,
}

RESTRICTION_COLUMNS_SCHEMA: Dict[str, pl.DataType] = {
    'fosd': pl.Float64,
    'homothetic': pl.Float64,
    'quasilinear': pl.Float64,
    'gapp': pl.Float64,
    'gapp_passes': pl.Boolean,
}

# Afriat certificate: utility numbers exist for a consistent dataset
AFRIAT_COLUMNS_SCHEMA: Dict[str, pl.DataType] = {
    'afriat_certified': pl.Boolean,
    'afriat_max_multiplier': pl.Float64,
}

SEASON_TABLE_SCHEMA: Dict[str, pl.DataType] = {
    'label': pl.Utf8,
    'season_a': pl.Utf8,
    'season_b': pl.Utf8,
    'proportion': pl.Float64,
}

POWER_SCHEMA: Dict[str, pl.DataType] = {
    'label': pl.Utf8,
    'observed_ccei': pl.Float64,
    'sim_mean': pl.Float64,
    'sim_sd': pl.Float64,
    'sim_min': pl.Float64,
    'sim_median': pl.Float64,
    'sim_max': pl.Float64,
    'selten': pl.Float64,
    'power_adjusted': pl.Float64,
}

PERMTEST_SCHEMA: Dict[str, pl.DataType] = {
    'label': pl.Utf8,
    'observed_ccei': pl.Float64,
    'p_value': pl.Float64,
    'aborted': pl.Boolean,
    'n_drawn': pl.Int64,
    'approximate_maximizer': pl.Boolean,
}

ESTIMATE_SCHEMA: Dict[str, pl.DataType] = {
    'label': pl.Utf8,
    'alpha': pl.Float64,
    'rho': pl.Float64,
    'g': pl.Float64,
    'm': pl.Float64,
    'sigma': pl.Float64,
    'loglik': pl.Float64,
    'converged': pl.Boolean,
    'iterations': pl.Int64,
}

CORRELATION_SCHEMA: Dict[str, pl.DataType] = {
    'left_column': pl.Utf8,
    'right_column': pl.Utf8,
    'test': pl.Utf8,
    'statistic': pl.Float64,
    'p_value': pl.Float64,
    'n': pl.Int64,
}


def validate_schema(df: pl.DataFrame, expected_schema: Dict[str, pl.DataType],
                    strict: bool = False, source_name: str = "Data") -> pl.DataFrame:
    """
    Validate and optionally fix DataFrame schema.

    Args:
        df: DataFrame to validate
        expected_schema: Expected column types
        strict: If True, raise on mismatch. If False, cast leniently.
        source_name: Name of data source for error messages

    Returns:
        DataFrame with corrected schema, columns ordered as in expected_schema
        first and any extra columns after
    """
    missing = [col for col in expected_schema if col not in df.columns]
    if missing:
        raise DataValidationError(
            source=source_name, operation="validate_schema",
            message=f"missing columns: {', '.join(missing)}",
        )

    if strict:
        mismatches = [
            f"Column '{col}': found {df[col].dtype}, expected {dtype}"
            for col, dtype in expected_schema.items()
            if df[col].dtype != dtype
        ]
        if mismatches:
            raise DataValidationError(
                source=source_name, operation="validate_schema",
                message="schema validation failed: " + "; ".join(mismatches),
            )
        return df

    casts = [
        pl.col(col).cast(dtype, strict=False).alias(col)
        for col, dtype in expected_schema.items()
        if df[col].dtype != dtype
    ]
    if casts:
        df = df.with_columns(casts)
    extras = [col for col in df.columns if col not in expected_schema]
    return df.select(list(expected_schema) + extras)


def empty_frame(schema: Dict[str, pl.DataType]) -> pl.DataFrame:
    """Zero-row frame carrying the given schema."""
    return pl.DataFrame(schema=schema)
