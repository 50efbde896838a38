"""
Tests for scenario partitions of transaction logs.
"""

from datetime import date

import pytest

from choice_consistency.pipelines.ingest_transactions import parse_transactions
from choice_consistency.pipelines.scenario_split import HolidayCalendar, split_scenario
from choice_consistency.utils.error_handling import DataValidationError, UsageError

OCTOBER = """membership_id,store_id,timestamp,category,quantity_kg,expenditure,discount_flag
c1,A1,2019-10-01 09:00:00,Meat,1,5,true
c1,A1,2019-10-08 09:00:00,Meat,1,5,false
c1,A1,2019-10-12 09:00:00,Meat,1,5,
c1,A1,2019-10-13 09:00:00,Meat,1,5,no
"""

CALENDAR = "date,label\n2019-10-01,National Day\n2019-10-12,workday\n"


@pytest.fixture
def october(write_csv):
    return parse_transactions(write_csv("oct.csv", OCTOBER)).frame


@pytest.fixture
def calendar(write_csv):
    return HolidayCalendar.from_csv(write_csv("calendar.csv", CALENDAR))


def lines(parts):
    return {label: frame["line_number"].to_list() for label, frame in parts.items()}


class TestSplits:

    def test_season(self, sample_transactions_csv):
        records = parse_transactions(sample_transactions_csv).frame
        assert lines(split_scenario(records, "season")) == {"autumn": [3, 4, 5], "spring": [2]}

    def test_year(self, sample_transactions_csv):
        records = parse_transactions(sample_transactions_csv).frame
        assert list(split_scenario(records, "year")) == ["2019"]

    def test_meal_time_windows_are_half_open(self, sample_transactions_csv):
        records = parse_transactions(sample_transactions_csv).frame
        assert lines(split_scenario(records, "meal_time")) == {"meal": [2, 3, 4], "non_meal": [5]}

    def test_working_day(self, october, calendar):
        """Holidays are off, make-up Saturdays are worked, Sundays are off."""
        assert lines(split_scenario(october, "working_day", calendar)) == {
            "non_working": [2, 5], "working": [3, 4]}

    def test_discount(self, october):
        assert lines(split_scenario(october, "discount")) == {
            "discounted": [2], "non_discounted": [3, 4, 5]}

    def test_parts_cover_every_record(self, october, calendar):
        parts = split_scenario(october, "working_day", calendar)
        assert sum(frame.height for frame in parts.values()) == october.height
        assert all(frame.columns == october.columns for frame in parts.values())

    def test_calendar_required(self, october):
        with pytest.raises(UsageError, match="calendar"):
            split_scenario(october, "working_day")

    def test_unknown_scenario(self, october):
        with pytest.raises(UsageError, match="scenario"):
            split_scenario(october, "weather")


class TestHolidayCalendar:

    def test_membership(self, calendar):
        assert not calendar.is_working_day(date(2019, 10, 1))
        assert calendar.is_working_day(date(2019, 10, 12))
        assert calendar.is_working_day(date(2019, 10, 8))
        assert not calendar.is_working_day(date(2019, 10, 13))

    def test_empty_calendar_uses_weekdays(self, october):
        parts = split_scenario(october, "working_day", HolidayCalendar())
        assert lines(parts) == {"non_working": [4, 5], "working": [2, 3]}

    def test_bad_date_reports_line(self, write_csv):
        with pytest.raises(DataValidationError) as excinfo:
            HolidayCalendar.from_csv(write_csv("cal.csv", "date,label\n2019-10-01,x\n2019/10/02,y\n"))
        assert excinfo.value.row == 3

    def test_missing_date_column(self, write_csv):
        with pytest.raises(DataValidationError, match="date"):
            HolidayCalendar.from_csv(write_csv("cal.csv", "day,label\n2019-10-01,x\n"))
