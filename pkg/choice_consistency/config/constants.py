"""
Configuration constants for the choice-consistency toolkit.
Centralized numeric tolerances, search budgets and pipeline settings.
"""

from pathlib import Path
from typing import Dict, Tuple


class Paths:
    """Centralized path configuration."""
    PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
    DEFAULT_CONFIG = PROJECT_ROOT / "consistency_config.yaml"
    ETL_REPORT_NAME = "etl_report.json"
    MANIFEST_SUFFIX = ".manifest.json"


class Tolerances:
    """Numeric tolerances shared by every relation and index computation."""
    # Absolute tolerance on p.x comparisons
    RELATION = 1e-9
    # Reported distance below an efficiency supremum that is not attained
    INDEX_RESOLUTION = 1e-6
    SHARE = 1e-9


class SearchConfig:
    """Exact combinatorial search settings."""
    NODE_CAP = 10_000_000


class PowerConfig:
    """Power simulation and permutation test defaults."""
    N_ROUNDS = 22
    N_OPTIONS = 11
    TOKENS = 100.0
    PRICE_RATIO_BOUND = 3.0
    N_SIMS = 1000
    N_PERMUTATIONS = 10_000
    ABORT_THRESHOLD = 0.2
    ABORT_CHECK_AT = 1000
    ALPHA = 0.05
    CCEI_DIFF_SPLITS = 100
    DEFAULT_SEED = 20190101


class EstimationConfig:
    """Tobit CES / DA estimation settings."""
    G_STARTS: Tuple[float, ...] = (0.25, 1.0, 4.0)
    M_STARTS: Tuple[float, ...] = (-0.5, 0.5, 2.0)
    GRADIENT_TOLERANCE = 1e-8
    M_CAP = 1e6
    # m <= -1 maps to rho >= 1 under rho = m / (1 + m)
    M_FLOOR = -1.0 + 1e-6
    LOG_G_BOUND = 50.0
    SIGMA_FLOOR = 1e-5
    MAX_ITERATIONS = 2000


class EtlConfig:
    """Scanner transaction pipeline settings."""
    REQUIRED_COLUMNS = (
        "membership_id", "store_id", "timestamp", "category",
        "quantity_kg", "expenditure",
    )
    OPTIONAL_COLUMNS = ("shelf_expenditure", "discount_flag", "subcategory")
    TIMESTAMP_FORMATS = (
        "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M",
    )
    # Half-open [start, end) windows in minutes after midnight
    MEAL_WINDOWS: Tuple[Tuple[int, int], ...] = ((10 * 60, 14 * 60), (16 * 60, 19 * 60))
    SEASONS: Dict[int, str] = {
        3: "spring", 4: "spring", 5: "spring",
        6: "summer", 7: "summer", 8: "summer",
        9: "autumn", 10: "autumn", 11: "autumn",
        12: "winter", 1: "winter", 2: "winter",
    }
    SCENARIOS = ("season", "year", "working_day", "meal_time", "discount")
    PRICE_BASES = ("final", "shelf", "population")
    TRUE_TOKENS = ("true", "1", "yes", "y", "t")
    FALSE_TOKENS = ("false", "0", "no", "n", "f")
    MAKEUP_WORKDAY_LABEL = "workday"


class AnalyticsConfig:
    """Behavioral metric settings."""
    MIDDLE_BAND = (0.4, 0.6)
    MIDDLE_RATIO_RANGE = (0.9, 1.1)
    GROUPINGS: Dict[str, int] = {"hours_of_day": 24, "days_of_week": 7, "ten_day_periods": 3}
    BASES = ("amount", "count")


class ExitCodes:
    """Process exit statuses of the command-line surface."""
    OK = 0
    DATA_ERROR = 1
    USAGE_ERROR = 2
    RESOURCE_CAP = 3


class ErrorMessages:
    """Standardized error messages."""
    NON_POSITIVE_PRICE = "non-positive price at row {row}"
    NEGATIVE_QUANTITY = "negative quantity at row {row}"
    ZERO_EXPENDITURE = "zero expenditure at row {row}"
    DIMENSION_MISMATCH = "dimension mismatch at row {row}: expected K={expected}, got {got}"
    EMPTY_DATASET = "dataset must contain at least one observation"
    EFFICIENCY_RANGE = "efficiency must lie in [0, 1], got {value}"
    NODE_CAP = "search budget of {cap} nodes exceeded"
    TWO_GOODS = "{operation} requires exactly two goods, got K={k}"
    ZERO_VARIANCE = "zero variance in {what}"
    MISSING_COLUMNS = "missing required columns: {columns}"
    CALENDAR_REQUIRED = "working_day scenario requires a holiday calendar"


class DevConfig:
    """Development and logging settings."""
    LOG_LEVEL = "WARNING"
    LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
