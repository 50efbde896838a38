#!/usr/bin/env python3
"""
choice-consistency command line

Batch commands over budget-choice datasets: consistency indices, power
diagnostics, permutation tests, scanner ETL, structural estimation,
behavioral metrics and cross-table correlations. Every run writes a manifest
next to its output; errors are reported as JSON on stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import polars as pl

from choice_consistency.choice_data import ChoiceDataset
from choice_consistency.config.app_config import APP_NAME, TITLE
from choice_consistency.config.constants import (
    AnalyticsConfig,
    DevConfig,
    EtlConfig,
    ExitCodes,
    Paths,
    PowerConfig,
    SearchConfig,
)
from choice_consistency.config.data_schemas import (
    AFRIAT_COLUMNS_SCHEMA,
    CORRELATION_SCHEMA,
    ESTIMATE_SCHEMA,
    INDEX_REPORT_SCHEMA,
    PERMTEST_SCHEMA,
    POWER_SCHEMA,
    RESTRICTION_COLUMNS_SCHEMA,
    SEASON_TABLE_SCHEMA,
)
from choice_consistency.data_access import (
    MetricJoiner,
    load_datasets,
    read_metric_table,
    write_table,
)
from choice_consistency.pipelines.ingest_transactions import filter_subcategories, parse_transactions
from choice_consistency.pipelines.scanner_warehouse import (
    EtlReport,
    aggregate_price_index,
    filter_consecutive,
    load_run_config,
    month_key,
    monthly_aggregate,
    write_datasets,
)
from choice_consistency.pipelines.scenario_split import HolidayCalendar, split_scenario
from choice_consistency.services import analytics, estimation, power_lab
from choice_consistency.services.garp_engine import (
    afriat_numbers,
    pairwise_violation_proportion,
    season_violation_table,
)
from choice_consistency.services.indices import ccei, index_report
from choice_consistency.services.restrictions import RESTRICTION_KINDS, restriction_report
from choice_consistency.utils.error_handling import (
    AnalysisError,
    DataValidationError,
    InsufficientVariationError,
    UsageError,
    error_payload,
    exit_code_for,
)
from choice_consistency.utils.manifest import build_manifest, get_tool_version, write_manifest
from choice_consistency.utils.parallel import map_by_label
from choice_consistency.utils.validation import FilterValidator

logger = logging.getLogger(__name__)

MODEL_FLAGS = {"ces": "ces", "da": "disappointment_aversion"}
PATH_FLAGS = ("input", "input_b", "left", "right", "calendar")
ANALYZE_KINDS = ("demand", "regularity", "scenario", "learning", "seasons")


class CliParser(argparse.ArgumentParser):
    """Argument parser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError("cli", "parse", message)


def _common(parser: argparse.ArgumentParser, seeded: bool = False, parallel: bool = False) -> None:
    parser.add_argument("--input", "-i", type=Path, help="Dataset file or directory")
    parser.add_argument("--output", "-o", type=Path, help="Output file")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    if seeded:
        parser.add_argument("--seed", type=int, default=PowerConfig.DEFAULT_SEED)
    if parallel:
        parser.add_argument("--jobs", type=int, default=1, help="Worker processes (one consumer per task)")


def build_parser() -> CliParser:
    parser = CliParser(prog=APP_NAME, description=TITLE)
    parser.add_argument("--config", type=Path, help="YAML file supplying default flag values")
    parser.add_argument("--log-level", default=DevConfig.LOG_LEVEL,
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    parser.add_argument("--version", action="version", version=get_tool_version())
    subparsers = parser.add_subparsers(dest="command")

    indices = subparsers.add_parser("indices", help="CCEI, HMI, MPI and MCI per dataset")
    _common(indices, parallel=True)
    indices.add_argument("--restrictions", action="store_true",
                         help="Append fosd, homothetic, quasilinear and gapp efficiency columns")
    indices.add_argument("--afriat", action="store_true",
                         help="Append whether Afriat utility numbers rationalize each dataset")
    indices.add_argument("--node-cap", type=int, default=SearchConfig.NODE_CAP)

    power = subparsers.add_parser("power", help="Random-chooser benchmarks and Selten scores")
    _common(power, seeded=True, parallel=True)
    power.add_argument("--mode", choices=("discrete", "shares"), default="discrete")
    power.add_argument("--sims", type=int, default=PowerConfig.N_SIMS)
    power.add_argument("--options", type=int, default=PowerConfig.N_OPTIONS)
    power.add_argument("--regression", choices=power_lab.REGRESSION_DIRECTIONS,
                       default="simulated-on-observed")

    permtest = subparsers.add_parser("permtest", help="Share-permutation test per dataset")
    _common(permtest, seeded=True, parallel=True)
    permtest.add_argument("--perms", type=int, default=PowerConfig.N_PERMUTATIONS)
    permtest.add_argument("--abort-threshold", type=float, default=PowerConfig.ABORT_THRESHOLD)
    permtest.add_argument("--abort-check-at", type=int, default=PowerConfig.ABORT_CHECK_AT)
    permtest.add_argument("--alpha", type=float, default=PowerConfig.ALPHA)

    etl = subparsers.add_parser("etl", help="Transactions to monthly consumer datasets")
    etl.add_argument("--input", "-i", type=Path, help="Transaction CSV")
    etl.add_argument("--output", "-o", type=Path, help="Output directory")
    etl.add_argument("--categories", help="Comma-separated categories, in good order")
    etl.add_argument("--window", help="YYYY-MM:YYYY-MM, inclusive")
    etl.add_argument("--require-consecutive", type=int, default=None)
    etl.add_argument("--lenient", action="store_true", help="Keep valid rows when some rows are malformed")
    etl.add_argument("--subcategory", default=None, help="Comma-separated subcategories to keep")
    etl.add_argument("--price-basis", choices=EtlConfig.PRICE_BASES, default="final")
    etl.add_argument("--scenario", choices=EtlConfig.SCENARIOS, default=None)
    etl.add_argument("--calendar", type=Path, default=None, help="Holiday calendar CSV (date,label)")

    estimate = subparsers.add_parser("estimate", help="Tobit CES / disappointment-aversion estimates")
    _common(estimate, parallel=True)
    estimate.add_argument("--model", choices=tuple(MODEL_FLAGS), default="ces")

    analyze = subparsers.add_parser("analyze", help="Behavioral metrics")
    _common(analyze, seeded=True)
    analyze.add_argument("--kind", choices=ANALYZE_KINDS, default="demand")
    analyze.add_argument("--input-b", type=Path, help="Second dataset directory (scenario)")
    analyze.add_argument("--year", type=int, help="Calendar year (regularity)")
    analyze.add_argument("--splits", type=int, default=PowerConfig.CCEI_DIFF_SPLITS)
    analyze.add_argument("--middle-rule", choices=analytics.MIDDLE_RULES, default="all")

    correlate = subparsers.add_parser("correlate", help="Join two metric tables on label and test")
    correlate.add_argument("--left", type=Path)
    correlate.add_argument("--right", type=Path)
    correlate.add_argument("--left-column")
    correlate.add_argument("--right-column")
    correlate.add_argument("--test", choices=("spearman", "paired-t"), default="spearman")
    correlate.add_argument("--output", "-o", type=Path)
    correlate.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise UsageError("cli", "parse", f"unknown command '{command}'")


def config_defaults(config: Dict[str, Any], command: str, subparser: argparse.ArgumentParser) -> Dict[str, Any]:
    """Flag values from a run config: top-level keys, then a section named after the command."""
    merged = {k: v for k, v in config.items() if not isinstance(v, dict)}
    merged.update(config.get(command) or {})
    known = {action.dest for action in subparser._actions}
    defaults = {}
    for key, value in merged.items():
        dest = str(key).replace("-", "_")
        if dest not in known:
            logger.debug(f"config key '{key}' does not apply to {command}")
            continue
        if dest in PATH_FLAGS + ("output",) and value is not None:
            value = Path(value)
        defaults[dest] = value
    return defaults


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse the command line, letting a YAML config supply defaults that the command line overrides."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        raise UsageError("cli", "parse", "a command is required")
    if args.config is not None:
        subparser = _subparser(parser, args.command)
        subparser.set_defaults(**config_defaults(load_run_config(args.config), args.command, subparser))
        args = parser.parse_args(argv)
    return args


def configure_logging(level: str) -> None:
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level.upper(), logging.WARNING),
                        format=DevConfig.LOG_FORMAT, force=True)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name, None) in (None, "")]
    if missing:
        raise UsageError("cli", args.command, f"missing required flags: {', '.join(missing)}")


def _frame(rows: List[Dict[str, Any]], schema: Dict[str, pl.DataType]) -> pl.DataFrame:
    if not rows:
        return pl.DataFrame(schema=schema)
    return pl.from_dicts(rows, schema=schema)


def _items(datasets: List[ChoiceDataset], *extra: Any) -> list:
    return [(ds.label, (ds, *extra)) for ds in datasets]


def _restriction_columns(ds: ChoiceDataset) -> Dict[str, Any]:
    # the mirror restriction is defined for two goods only
    reports = {kind: restriction_report(ds, kind) for kind in RESTRICTION_KINDS
               if kind != "fosd" or ds.n_goods == 2}
    columns: Dict[str, Any] = {kind: reports[kind].efficiency if kind in reports else None
                               for kind in RESTRICTION_KINDS}
    columns['gapp_passes'] = reports['gapp'].passes_at_1
    return columns


def _afriat_columns(ds: ChoiceDataset) -> Dict[str, Any]:
    solution = afriat_numbers(ds)
    return {
        'afriat_certified': solution is not None,
        'afriat_max_multiplier': max(solution.multipliers) if solution is not None else None,
    }


def _indices_task(payload) -> Dict[str, Any]:
    ds, node_cap, with_restrictions, with_afriat = payload
    row = index_report(ds, node_cap=node_cap).to_row()
    if with_restrictions:
        row.update(_restriction_columns(ds))
    if with_afriat:
        row.update(_afriat_columns(ds))
    return row


def run_indices(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "input", "output")
    datasets = load_datasets(args.input)
    items = _items(datasets, args.node_cap, args.restrictions, args.afriat)
    results = map_by_label(_indices_task, items, args.jobs)
    schema = dict(INDEX_REPORT_SCHEMA)
    if args.restrictions:
        schema.update(RESTRICTION_COLUMNS_SCHEMA)
    if args.afriat:
        schema.update(AFRIAT_COLUMNS_SCHEMA)
    return _frame([row for _, row in results], schema)


def _power_task(payload) -> Dict[str, Any]:
    ds, mode, sims, options, seed = payload
    if mode == "discrete":
        summary = power_lab.bronars_discrete(power_lab.design_from_dataset(ds), n_options=options,
                                             n_sims=sims, seed=seed, label=ds.label)
    else:
        summary = power_lab.bronars_shares(ds, n_sims=sims, seed=seed)
    observed = ccei(ds)
    return {
        'label': ds.label,
        'observed_ccei': observed,
        'sim_mean': summary.mean,
        'sim_sd': summary.sd,
        'sim_min': summary.min,
        'sim_median': summary.median,
        'sim_max': summary.max,
        'selten': power_lab.selten_score(observed, summary),
        'power_adjusted': None,
    }


def run_power(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "input", "output")
    datasets = load_datasets(args.input)
    rows = [row for _, row in map_by_label(
        _power_task, _items(datasets, args.mode, args.sims, args.options, args.seed), args.jobs)]
    if len(rows) >= 3:
        try:
            residuals = power_lab.power_adjusted_ccei(
                [r['observed_ccei'] for r in rows], [r['sim_mean'] for r in rows], direction=args.regression)
            for row, residual in zip(rows, residuals):
                row['power_adjusted'] = residual
        except InsufficientVariationError as e:
            logger.warning(f"power-adjusted CCEI left empty: {e.message}")
    else:
        logger.warning("power-adjusted CCEI needs at least three datasets")
    return _frame(rows, POWER_SCHEMA)


def _permtest_task(payload) -> Dict[str, Any]:
    ds, perms, threshold, check_at, alpha, seed = payload
    result = power_lab.permutation_test(ds, n_perm=perms, abort_threshold=threshold,
                                        abort_check_at=check_at, seed=seed, alpha=alpha)
    return {
        'label': ds.label,
        'observed_ccei': result.observed_ccei,
        'p_value': result.p_value,
        'aborted': result.aborted,
        'n_drawn': result.n_drawn,
        'approximate_maximizer': result.is_approximate_maximizer,
    }


def run_permtest(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "input", "output")
    datasets = load_datasets(args.input)
    items = _items(datasets, args.perms, args.abort_threshold, args.abort_check_at, args.alpha, args.seed)
    return _frame([row for _, row in map_by_label(_permtest_task, items, args.jobs)], PERMTEST_SCHEMA)


def _estimate_task(payload) -> Dict[str, Any]:
    ds, model_kind = payload
    return estimation.estimate_ces(ds, model_kind=model_kind).to_row()


def run_estimate(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "input", "output")
    datasets = load_datasets(args.input)
    items = _items(datasets, MODEL_FLAGS[args.model])
    return _frame([row for _, row in map_by_label(_estimate_task, items, args.jobs)], ESTIMATE_SCHEMA)


def _price_index(records: pl.DataFrame, categories: List[str], months: List[str]) -> Dict[str, float]:
    """Population price per category-month, keyed 'category/YYYY-MM'."""
    index = {}
    for category in categories:
        for month in months:
            try:
                index[f"{category}/{month}"] = aggregate_price_index(records, category, month)
            except DataValidationError as e:
                logger.debug(f"no price index: {e.message}")
    return index


def run_etl(args: argparse.Namespace) -> EtlReport:
    _require(args, "input", "output", "categories", "window")
    ok, categories, error = FilterValidator.validate_categories(args.categories)
    if not ok:
        raise UsageError("cli", "etl", error)
    ok, window, error = FilterValidator.validate_month_window(args.window)
    if not ok:
        raise UsageError("cli", "etl", error)
    subcategories = None
    if args.subcategory:
        ok, subcategories, error = FilterValidator.validate_categories(args.subcategory)
        if not ok:
            raise UsageError("cli", "etl", error)
    calendar = HolidayCalendar.from_csv(args.calendar) if args.calendar else None

    parsed = parse_transactions(args.input, lenient=args.lenient)
    records = filter_subcategories(parsed.frame, subcategories)
    report = EtlReport(
        rows_read=parsed.rows_read,
        parse_errors=len(parsed.errors),
        dropped_zero_rows=parsed.dropped_zero_rows,
        consumers_in=records["membership_id"].n_unique(),
    )
    parts = split_scenario(records, args.scenario, calendar) if args.scenario else {"": records}

    months, excluded, kept_consumers = set(), set(), set()
    for part, frame in parts.items():
        datasets = monthly_aggregate(frame, categories, window, price_basis=args.price_basis)
        if args.require_consecutive:
            datasets, dropped = filter_consecutive(datasets, args.require_consecutive,
                                                   window_start=month_key(window[0]))
            excluded.update(dropped)
        out_dir = Path(args.output) / part if part else Path(args.output)
        write_datasets(datasets, out_dir)
        for ds in datasets.values():
            months.update(ds.obs_ids)
        kept_consumers.update(datasets)
        if part:
            report.partitions[part] = len(datasets)

    report.consumers_out = len(kept_consumers)
    report.months_covered = sorted(months)
    report.excluded_consumers = sorted(excluded)
    if args.price_basis == "population":
        report.price_index = _price_index(records, categories, report.months_covered)
    report.write(Path(args.output) / Paths.ETL_REPORT_NAME)
    logger.info(f"ETL kept {report.consumers_out} of {report.consumers_in} consumers")
    return report


def _safe_correlation(operation, *values) -> Dict[str, Any]:
    try:
        result = operation(*values)
        return {'r': result.r, 'p': result.p_value, 'n': result.n}
    except InsufficientVariationError as e:
        logger.info(f"correlation skipped: {e.message}")
        return {'r': None, 'p': None, 'n': None}


def _analyze_demand(args: argparse.Namespace) -> pl.DataFrame:
    rows = []
    for ds in load_datasets(args.input):
        downward = _safe_correlation(analytics.downward_sloping_score, ds)
        is_middle, qualifying = analytics.middle_chooser(ds, rule=args.middle_rule)
        rows.append({
            'label': ds.label,
            'downward_r': downward['r'],
            'downward_p': downward['p'],
            'downward_n': downward['n'],
            'middle_chooser': is_middle,
            'qualifying_rounds': qualifying,
        })
    return _frame(rows, {'label': pl.Utf8, 'downward_r': pl.Float64, 'downward_p': pl.Float64,
                         'downward_n': pl.Int64, 'middle_chooser': pl.Boolean, 'qualifying_rounds': pl.Int64})


def _analyze_regularity(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "year")
    records = parse_transactions(args.input).frame
    consumers = sorted(records.filter(pl.col("timestamp").dt.year() == args.year)["membership_id"].unique())
    schema = {'label': pl.Utf8}
    for grouping in AnalyticsConfig.GROUPINGS:
        for basis in AnalyticsConfig.BASES:
            schema[f"v_{grouping}_{basis}"] = pl.Float64
    schema.update(prop_discounted=pl.Float64, aggregate_rate=pl.Float64, mean_txn_rate=pl.Float64)
    rows = []
    for consumer in consumers:
        row: Dict[str, Any] = {'label': consumer}
        for grouping in AnalyticsConfig.GROUPINGS:
            for basis in AnalyticsConfig.BASES:
                try:
                    value = analytics.volatility(records, consumer, args.year, grouping, basis).value
                except InsufficientVariationError:
                    value = None
                row[f"v_{grouping}_{basis}"] = value
        row.update(analytics.discount_metrics(records, consumer, args.year).to_dict())
        rows.append(row)
    return _frame(rows, schema)


def _analyze_scenario(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "input_b")
    first = {ds.label: ds for ds in load_datasets(args.input)}
    second = {ds.label: ds for ds in load_datasets(args.input_b)}
    shared = sorted(set(first) & set(second))
    unmatched = sorted(set(first) ^ set(second))
    if unmatched:
        logger.warning(f"{len(unmatched)} labels present in only one scenario part")
    rows = []
    for label in shared:
        s1, s2 = first[label], second[label]
        result = analytics.ccei_diff(s1, s2, n_splits=args.splits, seed=args.seed)
        combined = ChoiceDataset(observations=s1.observations + s2.observations, label=label)
        proportion = pairwise_violation_proportion(
            combined, range(s1.n_obs), range(s1.n_obs, combined.n_obs))
        rows.append({'label': label, **result.to_dict(), 'violation_proportion': proportion})
    return _frame(rows, {'label': pl.Utf8, 'diff': pl.Float64, 'benchmark_mean': pl.Float64,
                         'ccei_first': pl.Float64, 'ccei_second': pl.Float64,
                         'ccei_combined': pl.Float64, 'violation_proportion': pl.Float64})


def _analyze_learning(args: argparse.Namespace) -> pl.DataFrame:
    rows = []
    for ds in load_datasets(args.input):
        first, second = analytics.learning_split(ds)
        rows.append({'label': ds.label, 'ccei_first_half': ccei(first), 'ccei_second_half': ccei(second)})
    return _frame(rows, {'label': pl.Utf8, 'ccei_first_half': pl.Float64, 'ccei_second_half': pl.Float64})


def season_groups(ds: ChoiceDataset) -> Dict[str, List[int]]:
    """0-based observation indices per season of their YYYY-MM observation id."""
    groups: Dict[str, List[int]] = {}
    for index, obs_id in enumerate(ds.obs_ids):
        ok, month, error = FilterValidator.validate_month(obs_id)
        if not ok:
            raise DataValidationError(ds.label, "season_groups", error, row=index + 1)
        groups.setdefault(EtlConfig.SEASONS[month.month], []).append(index)
    return groups


def _analyze_seasons(args: argparse.Namespace) -> pl.DataFrame:
    rows = []
    for ds in load_datasets(args.input):
        table = season_violation_table(ds, season_groups(ds))
        rows.extend({'label': ds.label, 'season_a': first, 'season_b': second, 'proportion': proportion}
                    for (first, second), proportion in sorted(table.items()))
    return _frame(rows, SEASON_TABLE_SCHEMA)


def run_analyze(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "input", "output")
    handlers = {
        'demand': _analyze_demand,
        'regularity': _analyze_regularity,
        'scenario': _analyze_scenario,
        'learning': _analyze_learning,
        'seasons': _analyze_seasons,
    }
    return handlers[args.kind](args)


def run_correlate(args: argparse.Namespace) -> pl.DataFrame:
    _require(args, "left", "right", "left_column", "right_column", "output")
    joined = MetricJoiner(read_metric_table(args.left), read_metric_table(args.right)).join(
        args.left_column, args.right_column)
    left, right = joined["left_value"].to_list(), joined["right_value"].to_list()
    if args.test == "spearman":
        result = analytics.spearman(left, right)
        statistic, p_value, n = result.r, result.p_value, result.n
    else:
        statistic, p_value = analytics.paired_ttest(left, right)
        n = len(left)
    return _frame([{
        'left_column': args.left_column,
        'right_column': args.right_column,
        'test': args.test,
        'statistic': statistic,
        'p_value': p_value,
        'n': n,
    }], CORRELATION_SCHEMA)


COMMANDS = {
    'indices': run_indices,
    'power': run_power,
    'permtest': run_permtest,
    'etl': run_etl,
    'estimate': run_estimate,
    'analyze': run_analyze,
    'correlate': run_correlate,
}


def manifest_flags(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {"command", "log_level", "config", "jobs"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


def run(args: argparse.Namespace) -> int:
    result = COMMANDS[args.command](args)
    if isinstance(result, pl.DataFrame):
        write_table(result, args.output, fmt=args.format)
    inputs = [getattr(args, name) for name in PATH_FLAGS + ("config",) if getattr(args, name, None)]
    write_manifest(args.output, build_manifest(args.command, inputs, manifest_flags(args),
                                               getattr(args, "seed", None)))
    return ExitCodes.OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        configure_logging(args.log_level)
        return run(args)
    except AnalysisError as e:
        error = e
    except (OSError, ValueError, KeyError) as e:
        error = DataValidationError("cli", "run", str(e), original_error=e)
    logger.error(str(error))
    print(json.dumps(error_payload(error), sort_keys=True), file=sys.stderr)
    return exit_code_for(error)


if __name__ == "__main__":
    sys.exit(main())
