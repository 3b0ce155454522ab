from datetime import date

import pytest

from app.core.config import Settings
from app.core.errors import DataValidationError, DomainError
from app.schemas.abtest import ExtremityClass
from app.schemas.series import DailySeries
from app.services import pipeline


def _series(values, start: int = 1) -> DailySeries:
    days = [date(2021, 3, start + i) for i in range(len(values))]
    return DailySeries(dates=days, precip_mm=values)


# ============================================================================
# INGESTION
# ============================================================================

def test_parse_skips_header_comments_and_blank_lines():
    text = "# exported 2021-04-01\ndate,precip_mm\n\n2021-03-01,0.0\n2021-03-02,4.2\n# note\n2021-03-03,1.0\n"
    series = pipeline.parse_daily_text(text, station_id="kazan")

    assert series.station_id == "kazan"
    assert series.dates == [date(2021, 3, 1), date(2021, 3, 2), date(2021, 3, 3)]
    assert series.precip_mm == [0.0, 4.2, 1.0]


def test_parse_without_header():
    series = pipeline.parse_daily_text("2021-03-01,1.5\n2021-03-02,0\n")
    assert len(series) == 2


def test_parse_uses_configured_delimiter():
    config = Settings(CSV_DELIMITER=";", LOG_TO_FILE=False)
    series = pipeline.parse_daily_text("date;mm\n2021-03-01;2.5\n", config)
    assert series.precip_mm == [2.5]


@pytest.mark.parametrize(
    "text, line",
    [
        ("date,mm\n2021-03-02,1.0\n2021-03-01,1.0\n", 3),
        ("2021-03-01,1.0\n2021-03-01,2.0\n", 2),
        ("2021-03-01,1.0\n2021-03-02,-0.5\n", 2),
        ("2021-03-01,1.0\n2021-03-02,lots\n", 2),
        ("2021-03-01,1.0\n2021-02-30,1.0\n", 2),
        ("2021-03-01,1.0\n2021-03-02\n", 2),
        ("2021-03-01,1.0\n2021-03-02,1.0,7\n", 2),
        ("2021-13-01,1.0\n2021-03-02,1.0\n", 1),
        ("# station\n2021-03-01,abc\n2021-03-02,1.0\n", 2),
    ],
)
def test_parse_reports_offending_line(text, line):
    with pytest.raises(DataValidationError) as excinfo:
        pipeline.parse_daily_text(text)
    assert excinfo.value.line == line
    assert excinfo.value.to_dict()["details"]["line"] == line


def test_malformed_first_row_is_not_taken_as_a_header():
    with pytest.raises(DataValidationError) as excinfo:
        pipeline.parse_daily_text("2021-02-30,1.0\n2021-03-01,2.0\n")
    assert excinfo.value.line == 1

    with pytest.raises(DataValidationError) as excinfo:
        pipeline.parse_daily_text("\n# comment\n21-03-01x,4.0\n2021-03-02,2.0\n")
    assert excinfo.value.line == 3


def test_header_row_is_kept_out_of_the_series():
    series = pipeline.parse_daily_text("day,rain\n2021-03-01,1.0\n")
    assert series.dates == [date(2021, 3, 1)]


def test_missing_values_rejected_by_default():
    with pytest.raises(DataValidationError) as excinfo:
        pipeline.parse_daily_text("2021-03-01,1.0\n2021-03-02,\n2021-03-03,2.0\n")
    assert excinfo.value.line == 2


def test_missing_values_split_into_a_gap():
    config = Settings(MISSING_POLICY="split", MISSING_VALUE_TOKEN="NA", LOG_TO_FILE=False)
    series = pipeline.parse_daily_text("2021-03-01,1.0\n2021-03-02,NA\n2021-03-03,2.0\n", config)
    assert series.dates == [date(2021, 3, 1), date(2021, 3, 3)]

    periods = pipeline.segment_wet_periods(series)
    assert [p.duration_days for p in periods] == [1, 1]


def test_parse_missing_file(tmp_path):
    with pytest.raises(DataValidationError):
        pipeline.parse_daily_csv(tmp_path / "absent.csv")


def test_parse_csv_file_takes_station_from_name(daily_csv):
    series = pipeline.parse_daily_csv(daily_csv)
    assert series.station_id == "moscow"
    assert len(series) == 1100


# ============================================================================
# SEGMENTATION
# ============================================================================

def test_segment_wet_periods():
    series = _series([0.0, 1.0, 2.0, 0.0, 3.0, 0.0, 0.0, 4.0, 5.0, 6.0])
    periods = pipeline.segment_wet_periods(series)

    assert [p.duration_days for p in periods] == [2, 1, 3]
    assert [p.total_volume_mm for p in periods] == [3.0, 3.0, 15.0]
    assert [p.max_daily_mm for p in periods] == [2.0, 3.0, 6.0]
    assert [p.start_index for p in periods] == [1, 4, 7]
    assert periods[0].start_date == date(2021, 3, 2)


def test_date_gap_ends_a_wet_period():
    series = DailySeries(dates=[date(2021, 3, 1), date(2021, 3, 2), date(2021, 3, 4)], precip_mm=[1.0, 1.0, 1.0])
    assert [p.duration_days for p in pipeline.segment_wet_periods(series)] == [2, 1]


def test_wet_threshold_and_dry_series():
    series = _series([0.05, 0.3, 0.05, 0.2])
    assert [p.duration_days for p in pipeline.segment_wet_periods(series, 0.1)] == [1, 1]
    assert pipeline.segment_wet_periods(_series([0.0, 0.0])) == []
    with pytest.raises(DomainError):
        pipeline.segment_wet_periods(series, -1.0)


def test_wet_period_columns():
    periods = pipeline.segment_wet_periods(_series([2.0, 1.0, 0.0, 5.0]))
    columns = pipeline.wet_period_columns(periods)
    assert columns.durations == [2, 1]
    assert columns.totals == [3.0, 5.0]
    assert columns.maxima == [2.0, 5.0]
    assert columns.start_dates == [date(2021, 3, 1), date(2021, 3, 4)]


# ============================================================================
# CSV OUTPUT
# ============================================================================

def test_format_csv_cells():
    text = pipeline.format_csv(
        ("k", "value", "day", "class", "flag"),
        [(1, 0.1, date(2021, 3, 1), ExtremityClass.ABSOLUTE, True)],
    )
    lines = text.splitlines()
    assert lines[0] == pipeline.CSV_VERSION_LINE
    assert lines[1] == "k,value,day,class,flag"
    assert lines[2] == "1,0.1,2021-03-01,absolute,true"


def test_written_csv_reads_back(tmp_path):
    path = pipeline.write_csv(tmp_path / "out" / "table.csv", ("k", "pmf"), [(1, 1 / 3), (2, 2e-17)], delimiter=";")
    header, rows = pipeline.read_csv(path, delimiter=";")
    assert header == ["k", "pmf"]
    assert float(rows[0][1]) == 1 / 3
    assert float(rows[1][1]) == 2e-17


def test_read_csv_rejects_unknown_version():
    with pytest.raises(DataValidationError) as excinfo:
        pipeline.read_csv_text("# precip-glaw v0\nk,pmf\n")
    assert excinfo.value.line == 1


def test_empty_table_keeps_its_header():
    text = pipeline.format_csv(("k", "value"), [])
    assert text.splitlines() == [pipeline.CSV_VERSION_LINE, "k,value"]
    assert pipeline.read_csv_text(text) == (["k", "value"], [])


def test_write_into_a_file_path_is_a_data_error(tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("", encoding="UTF-8")
    with pytest.raises(DataValidationError) as excinfo:
        pipeline.write_csv(blocker / "sub" / "table.csv", ("k",), [(1,)])
    assert excinfo.value.details["path"] == str(blocker / "sub" / "table.csv")
