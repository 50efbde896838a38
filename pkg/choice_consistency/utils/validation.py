"""
Input validation utilities.
Static validators return (is_valid, sanitized_value, error_message) tuples;
callers decide whether a failure is raised or collected.
"""

import re
from datetime import date
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from choice_consistency.config.constants import ErrorMessages

_MONTH_PATTERN = re.compile(r"^(\d{4})-(\d{2})$")


class ChoiceDataValidator:
    """Validates observation rows and index arguments."""

    @staticmethod
    def validate_efficiency(value: Any) -> Tuple[bool, Optional[float], str]:
        try:
            e = float(value)
        except (TypeError, ValueError):
            return False, None, ErrorMessages.EFFICIENCY_RANGE.format(value=value)
        if not 0.0 <= e <= 1.0:
            return False, None, ErrorMessages.EFFICIENCY_RANGE.format(value=value)
        return True, e, ""

    @staticmethod
    def validate_observation(prices: Sequence[float], bundle: Sequence[float], row: int,
                             expected_k: Optional[int] = None
                             ) -> Tuple[bool, Optional[Tuple[np.ndarray, np.ndarray]], str]:
        """
        Validate one (prices, bundle) row.

        Args:
            row: 1-based row number used in messages
            expected_k: Number of goods fixed by earlier rows, if any
        """
        p = np.asarray(prices, dtype=float).ravel()
        x = np.asarray(bundle, dtype=float).ravel()
        k = expected_k if expected_k is not None else len(p)
        if len(p) != k or len(x) != k or k == 0:
            got = len(p) if len(p) != k else len(x)
            return False, None, ErrorMessages.DIMENSION_MISMATCH.format(row=row, expected=k, got=got)
        if not (np.all(np.isfinite(p)) and np.all(p > 0)):
            return False, None, ErrorMessages.NON_POSITIVE_PRICE.format(row=row)
        if not (np.all(np.isfinite(x)) and np.all(x >= 0)):
            return False, None, ErrorMessages.NEGATIVE_QUANTITY.format(row=row)
        if float(p @ x) <= 0.0:
            return False, None, ErrorMessages.ZERO_EXPENDITURE.format(row=row)
        return True, (p, x), ""

    @staticmethod
    def validate_index_groups(group_a: Sequence[int], group_b: Sequence[int],
                              n_obs: int) -> Tuple[bool, Optional[Tuple[List[int], List[int]]], str]:
        a = sorted(set(int(i) for i in group_a))
        b = sorted(set(int(i) for i in group_b))
        if not a or not b:
            return False, None, "empty group"
        if any(i < 0 or i >= n_obs for i in a + b):
            return False, None, f"group index outside 0..{n_obs - 1}"
        if a != b and set(a) & set(b):
            return False, None, "groups must be disjoint or identical"
        return True, (a, b), ""


class FilterValidator:
    """Validates ETL filters supplied on the command line."""

    @staticmethod
    def validate_month(value: Any) -> Tuple[bool, Optional[date], str]:
        match = _MONTH_PATTERN.match(str(value).strip())
        if not match:
            return False, None, f"Invalid month (expected YYYY-MM): {value}"
        year, month = int(match.group(1)), int(match.group(2))
        if not 1 <= month <= 12:
            return False, None, f"Invalid month value: {value}"
        return True, date(year, month, 1), ""

    @staticmethod
    def validate_month_window(value: Any) -> Tuple[bool, Optional[Tuple[date, date]], str]:
        """Parse `YYYY-MM:YYYY-MM` into first-of-month bounds, both inclusive."""
        parts = str(value).split(":")
        if len(parts) != 2:
            return False, None, f"Invalid window (expected YYYY-MM:YYYY-MM): {value}"
        ok_start, start, error = FilterValidator.validate_month(parts[0])
        if not ok_start:
            return False, None, error
        ok_end, end, error = FilterValidator.validate_month(parts[1])
        if not ok_end:
            return False, None, error
        if end < start:
            return False, None, f"Empty window: {value}"
        return True, (start, end), ""

    @staticmethod
    def validate_categories(value: Any) -> Tuple[bool, List[str], str]:
        if isinstance(value, str):
            items = [item.strip() for item in value.split(",")]
        else:
            items = [str(item).strip() for item in value or []]
        items = [item for item in items if item]
        if not items:
            return False, [], "at least one category is required"
        if len(set(items)) != len(items):
            return False, [], f"duplicate categories: {value}"
        return True, items, ""


def create_validation_report(invalid_records: List[Dict[str, Any]]) -> str:
    """Create a human-readable validation report from {'line_number', 'errors'} records."""
    if not invalid_records:
        return "All records passed validation."

    report = f"Validation Report - {len(invalid_records)} invalid records found:\n\n"
    for record in invalid_records[:10]:
        report += f"Line {record['line_number']}:\n"
        for error in record['errors']:
            report += f"  - {error}\n"
    if len(invalid_records) > 10:
        report += f"... and {len(invalid_records) - 10} more invalid records.\n"
    return report
