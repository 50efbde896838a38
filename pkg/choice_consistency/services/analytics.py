"""
Cross-dataset statistics and behavioral metrics.

Rank correlations, scenario CCEI differences, downward-sloping demand,
middle choosers, month-to-month consumption regularity and discount usage.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence, Tuple

import numpy as np
import polars as pl
from scipy import stats

from choice_consistency.choice_data import ChoiceDataset
from choice_consistency.config.constants import AnalyticsConfig, ErrorMessages, PowerConfig, Tolerances
from choice_consistency.services.indices import ccei
from choice_consistency.utils.error_handling import DataValidationError, InsufficientVariationError
from choice_consistency.utils.rng import substream

logger = logging.getLogger(__name__)

MIDDLE_RULES = ("all", "majority")


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CceiDiffResult:
    diff: float
    benchmark_mean: float
    ccei_first: float
    ccei_second: float
    ccei_combined: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VolatilityResult:
    grouping: str
    basis: str
    value: float


@dataclass(frozen=True)
class DiscountMetrics:
    prop_discounted: float
    aggregate_rate: float
    mean_txn_rate: float

    def to_dict(self) -> dict:
        return asdict(self)


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson correlation of average ranks, with a two-sided t-approximation p-value."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise DataValidationError("analytics", "spearman", "equal lengths of at least 3 required")
    rx, ry = stats.rankdata(x), stats.rankdata(y)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise InsufficientVariationError("analytics", "spearman", ErrorMessages.ZERO_VARIANCE.format(what="ranks"))
    r = float(np.clip(np.corrcoef(rx, ry)[0, 1], -1.0, 1.0))
    n = int(x.size)
    if abs(r) >= 1.0 - 1e-15:
        return CorrelationResult(r=r, p_value=0.0, n=n)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p_value = float(2.0 * stats.t.sf(abs(t), df=n - 2))
    return CorrelationResult(r=r, p_value=min(1.0, p_value), n=n)


def _combined(s1: ChoiceDataset, s2: ChoiceDataset) -> ChoiceDataset:
    if s1.n_goods != s2.n_goods:
        raise DataValidationError("analytics", "ccei_diff",
                                  f"datasets disagree on K: {s1.n_goods} vs {s2.n_goods}")
    return ChoiceDataset(observations=s1.observations + s2.observations, label=s1.label)


def _diff_statistic(first: ChoiceDataset, second: ChoiceDataset, combined: ChoiceDataset):
    c1, c2, c12 = ccei(first), ccei(second), ccei(combined)
    return max(0.0, min(c1, c2) - c12), c1, c2, c12


def ccei_diff(s1: ChoiceDataset, s2: ChoiceDataset, n_splits: int = PowerConfig.CCEI_DIFF_SPLITS,
              seed: int = PowerConfig.DEFAULT_SEED) -> CceiDiffResult:
    """
    min(CCEI(s1), CCEI(s2)) - CCEI(s1 + s2), with a benchmark mean over random
    re-partitions of the combined observations into parts of the same sizes.
    """
    combined = _combined(s1, s2)
    diff, c1, c2, c12 = _diff_statistic(s1, s2, combined)
    rng = substream(seed, f"ccei-diff:{s1.label}")
    benchmark = []
    for _ in range(n_splits):
        order = rng.permutation(combined.n_obs)
        first = combined.subset(order[:s1.n_obs])
        second = combined.subset(order[s1.n_obs:])
        benchmark.append(_diff_statistic(first, second, combined)[0])
    benchmark_mean = float(np.mean(benchmark)) if benchmark else 0.0
    return CceiDiffResult(diff=diff, benchmark_mean=benchmark_mean,
                          ccei_first=c1, ccei_second=c2, ccei_combined=c12)


def _two_goods(ds: ChoiceDataset, operation: str) -> None:
    if ds.n_goods != 2:
        raise DataValidationError("analytics", operation,
                                  ErrorMessages.TWO_GOODS.format(operation=operation, k=ds.n_goods))


def downward_sloping_score(ds: ChoiceDataset) -> CorrelationResult:
    """Spearman correlation between ln(x1/x2) and ln(p1/p2) over rounds buying both goods."""
    _two_goods(ds, "downward_sloping_score")
    prices, bundles = ds.prices, ds.bundles
    interior = np.all(bundles > 0, axis=1)
    if interior.sum() < 3:
        raise InsufficientVariationError("analytics", "downward_sloping_score",
                                         f"only {int(interior.sum())} rounds with both goods bought")
    quantity_ratio = np.log(bundles[interior, 0] / bundles[interior, 1])
    price_ratio = np.log(prices[interior, 0] / prices[interior, 1])
    return spearman(quantity_ratio, price_ratio)


def middle_chooser(ds: ChoiceDataset, band: Tuple[float, float] = AnalyticsConfig.MIDDLE_BAND,
                   ratio_range: Tuple[float, float] = AnalyticsConfig.MIDDLE_RATIO_RANGE,
                   rule: str = "all") -> Tuple[bool, int]:
    """
    (is_middle, qualifying_rounds) for experiment-style two-good rounds.

    Rounds qualify when p1/p2 lies in ratio_range; a qualifying round is near the
    middle when the budget share of good 1 lies in band. No qualifying round
    means not a middle chooser.
    """
    _two_goods(ds, "middle_chooser")
    if rule not in MIDDLE_RULES:
        raise DataValidationError("analytics", "middle_chooser", f"rule must be one of {MIDDLE_RULES}")
    prices = ds.prices
    ratio = prices[:, 0] / prices[:, 1]
    qualifying = (ratio >= ratio_range[0] - Tolerances.SHARE) & (ratio <= ratio_range[1] + Tolerances.SHARE)
    n_qualifying = int(qualifying.sum())
    if n_qualifying == 0:
        return False, 0
    shares = prices[:, 0] * ds.bundles[:, 0] / ds.expenditures
    near_middle = (shares >= band[0] - Tolerances.SHARE) & (shares <= band[1] + Tolerances.SHARE)
    hits = int((near_middle & qualifying).sum())
    if rule == "all":
        return hits == n_qualifying, n_qualifying
    return hits * 2 > n_qualifying, n_qualifying


def _consumer_year(records: pl.DataFrame, consumer: str, year: int, operation: str) -> pl.DataFrame:
    frame = records.filter(
        (pl.col("membership_id") == str(consumer)) & (pl.col("timestamp").dt.year() == int(year))
    )
    if frame.height == 0:
        raise DataValidationError("analytics", operation, f"no transactions for {consumer} in {year}")
    return frame


def _group_key(grouping: str) -> pl.Expr:
    if grouping == "hours_of_day":
        return pl.col("timestamp").dt.hour().cast(pl.Int64)
    if grouping == "days_of_week":
        return (pl.col("timestamp").dt.weekday() - 1).cast(pl.Int64)
    if grouping == "ten_day_periods":
        day = pl.col("timestamp").dt.day()
        return pl.when(day <= 10).then(0).when(day <= 20).then(1).otherwise(2).cast(pl.Int64)
    raise DataValidationError("analytics", "volatility",
                              f"grouping must be one of {tuple(AnalyticsConfig.GROUPINGS)}, got '{grouping}'")


def volatility(records: pl.DataFrame, consumer: str, year: int,
               grouping: str, basis: str = "amount") -> VolatilityResult:
    """
    Mean over groups of the across-month standard deviation of monthly group shares.

    Months without transactions contribute zero shares to all twelve months of the frame.
    """
    if basis not in AnalyticsConfig.BASES:
        raise DataValidationError("analytics", "volatility",
                                  f"basis must be one of {AnalyticsConfig.BASES}, got '{basis}'")
    key = _group_key(grouping)
    frame = _consumer_year(records, consumer, year, "volatility")
    months = frame["timestamp"].dt.month().n_unique()
    if months < 2:
        raise InsufficientVariationError("analytics", "volatility",
                                         f"{consumer} has transactions in only {months} month of {year}")
    measure = pl.col("expenditure").sum() if basis == "amount" else pl.len()
    cells = (
        frame.with_columns(
            pl.col("timestamp").dt.month().cast(pl.Int64).alias("month"),
            key.alias("group"),
        )
        .group_by(["month", "group"])
        .agg(measure.cast(pl.Float64).alias("volume"))
    )
    n_groups = AnalyticsConfig.GROUPINGS[grouping]
    volume = np.zeros((12, n_groups))
    for month, group, value in cells.iter_rows():
        volume[month - 1, group] += value
    totals = volume.sum(axis=1, keepdims=True)
    shares = np.divide(volume, totals, out=np.zeros_like(volume), where=totals > 0)
    value = float(shares.std(axis=0, ddof=1).mean())
    return VolatilityResult(grouping=grouping, basis=basis, value=value)


def discount_metrics(records: pl.DataFrame, consumer: str, year: int) -> DiscountMetrics:
    """Proportion of discounted transactions, aggregate discount rate and mean transaction discount rate."""
    frame = _consumer_year(records, consumer, year, "discount_metrics").with_columns(
        pl.coalesce(pl.col("shelf_expenditure"), pl.col("expenditure")).alias("shelf")
    )
    shelf = frame["shelf"].to_numpy().astype(float)
    final = frame["expenditure"].to_numpy().astype(float)
    shelf_total = float(shelf.sum())
    if shelf_total <= 0 or np.any(shelf <= 0):
        raise DataValidationError("analytics", "discount_metrics", "shelf expenditure must be positive")
    # an explicit flag wins; blank flags fall back to shelf above final
    inferred = (pl.col("shelf") - pl.col("expenditure")) > Tolerances.RELATION
    flag = pl.coalesce(pl.col("discount_flag"), inferred) if "discount_flag" in frame.columns else inferred
    discounted = frame.select(flag.alias("discounted"))["discounted"].to_numpy().astype(bool)
    return DiscountMetrics(
        prop_discounted=float(discounted.mean()),
        aggregate_rate=float((shelf_total - final.sum()) / shelf_total),
        mean_txn_rate=float(np.mean((shelf - final) / shelf)),
    )


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise DataValidationError("analytics", "paired_ttest", "equal lengths of at least 2 required")
    if np.ptp(a - b) == 0.0:
        raise InsufficientVariationError("analytics", "paired_ttest",
                                         ErrorMessages.ZERO_VARIANCE.format(what="paired differences"))
    result = stats.ttest_rel(a, b)
    return float(result.statistic), float(result.pvalue)


def learning_split(ds: ChoiceDataset) -> Tuple[ChoiceDataset, ChoiceDataset]:
    """First ceil(T/2) rounds and the remaining rounds."""
    if ds.n_obs < 2:
        raise DataValidationError("analytics", "learning_split", "at least two rounds required")
    half = math.ceil(ds.n_obs / 2)
    return ds.subset(range(half)), ds.subset(range(half, ds.n_obs))
