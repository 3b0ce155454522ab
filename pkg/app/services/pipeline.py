"""
Daily-series ingestion, wet-period segmentation and versioned CSV output
"""
import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from io import StringIO
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pandas.errors import EmptyDataError, ParserError
from pydantic import ValidationError

from app.core.config import Settings, settings
from app.core.errors import DataValidationError, DomainError
from app.core.logger import pipeline_logger
from app.schemas.series import DailySeries, WetPeriod

CSV_VERSION_LINE: str = "# precip-glaw v1"

PathLike = Union[str, Path]


@dataclass(frozen=True)
class WetPeriodColumns:
    """Per-period arrays pulled out of a segmentation, in time order"""

    durations: List[int]
    totals: List[float]
    maxima: List[float]
    start_dates: List[date]


# ============================================================================
# INGESTION
# ============================================================================

_COLUMNS: Tuple[str, ...] = ("date", "value", "extra")

_PROBLEMS: Tuple[str, ...] = (
    "",
    "expected 2 columns, got {columns}",
    "invalid ISO-8601 date {date!r}",
    "date {date} does not follow the previous row",
    "missing value on {date}",
    "invalid precipitation value {value!r}",
    "precipitation must be finite, got {value}",
    "negative precipitation {value}",
)


def _data_lines(text: str, delimiter: str) -> Tuple[List[int], List[str]]:
    """Lines holding data and their 1-based numbers; blanks and '#' comments dropped"""
    numbers: List[int] = []
    lines: List[str] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped.replace(delimiter, "").strip() or stripped.startswith("#"):
            continue
        numbers.append(number)
        lines.append(raw)
    return numbers, lines


def _read_frame(lines: List[str], numbers: List[int], delimiter: str) -> pd.DataFrame:
    try:
        return pd.read_csv(
            StringIO("\n".join(lines)),
            sep=delimiter,
            header=None,
            names=list(_COLUMNS),
            dtype=str,
            keep_default_na=False,
            index_col=False,
            skipinitialspace=True,
        )
    except ParserError as e:
        match = re.search(r"line (\d+), saw (\d+)", str(e))
        if match is None:
            raise DataValidationError(f"malformed CSV: {e}")
        line = numbers[int(match.group(1)) - 1]
        raise DataValidationError(f"expected 2 columns, got {match.group(2)}", line=line)


def _is_header(first: pd.Series) -> bool:
    """A first row is a header only when neither cell reads as data"""
    day = pd.to_datetime(str(first["date"]).strip(), format="%Y-%m-%d", errors="coerce")
    value = pd.to_numeric(str(first["value"]).strip(), errors="coerce")
    return pd.isna(day) and pd.isna(value)


def parse_daily_text(text: str, config: Optional[Settings] = None, station_id: str = "station") -> DailySeries:
    """
    Parse two-column daily data: ISO-8601 date, precipitation in mm

    Blank lines and lines starting with '#' are skipped. The first data row is
    taken as a header when neither its date nor its value parses; any other
    malformed row is an error. Missing values (the configured token) are
    rejected or dropped according to MISSING_POLICY; a dropped day becomes a
    date gap.

    Raises:
        DataValidationError: With the offending line number
    """
    config = config or settings
    numbers, lines = _data_lines(text, config.CSV_DELIMITER)
    dates: List[date] = []
    values: List[float] = []

    if lines:
        frame = _read_frame(lines, numbers, config.CSV_DELIMITER)
        if _is_header(frame.iloc[0]):
            frame, numbers = frame.iloc[1:].reset_index(drop=True), numbers[1:]

        date_text = frame["date"].fillna("").str.strip()
        value_text = frame["value"].fillna("").str.strip()
        parsed = pd.to_datetime(date_text, format="%Y-%m-%d", errors="coerce")
        amounts = pd.to_numeric(value_text, errors="coerce")

        short = frame["value"].isna()
        extra = frame["extra"].notna() & (frame["extra"].fillna("").str.strip() != "")
        missing = (value_text == config.MISSING_VALUE_TOKEN) & ~short

        # per row, the first failing check wins; across rows the earliest row
        codes = np.select(
            [
                (short | extra).to_numpy(),
                parsed.isna().to_numpy(),
                (parsed.diff() <= pd.Timedelta(0)).to_numpy(),
                (missing & (config.MISSING_POLICY == "reject")).to_numpy(),
                (amounts.isna() & ~missing).to_numpy(),
                (~missing & ~np.isfinite(amounts.fillna(0.0))).to_numpy(),
                (amounts < 0).to_numpy(),
            ],
            list(range(1, len(_PROBLEMS))),
            default=0,
        )
        if codes.any():
            row = int(np.flatnonzero(codes)[0])
            message = _PROBLEMS[codes[row]].format(
                columns=1 if short.iloc[row] else 3,
                date=date_text.iloc[row],
                value=value_text.iloc[row],
            )
            raise DataValidationError(message, line=numbers[row])

        keep = ~missing
        dates = [stamp.date() for stamp in parsed[keep]]
        values = amounts[keep].astype(float).tolist()

    try:
        series = DailySeries(dates=dates, precip_mm=values, station_id=station_id)
    except ValidationError as e:
        raise DataValidationError(f"invalid daily series: {e.errors()[0]['msg']}")

    pipeline_logger.info(f"Parsed {len(series)} days for station {station_id}")
    return series


def parse_daily_csv(path: PathLike, config: Optional[Settings] = None) -> DailySeries:
    """Read a daily CSV file; the file stem becomes the station id"""
    path = Path(path)
    try:
        text = path.read_text(encoding="UTF-8")
    except FileNotFoundError:
        raise DataValidationError(f"input file not found: {path}")
    except OSError as e:
        raise DataValidationError(f"cannot read {path}: {e.strerror or e}", details={"path": str(path)})
    return parse_daily_text(text, config, station_id=path.stem)


# ============================================================================
# SEGMENTATION
# ============================================================================

def segment_wet_periods(s: DailySeries, wet_threshold_mm: Optional[float] = None) -> List[WetPeriod]:
    """
    Maximal runs of consecutive days with precipitation above the threshold

    A gap in the dates ends any open run.
    """
    threshold = settings.WET_THRESHOLD_MM if wet_threshold_mm is None else wet_threshold_mm
    if not threshold >= 0:
        raise DomainError(f"wet threshold must be >= 0, got {threshold}")

    precip = np.asarray(s.precip_mm, dtype=float)
    wet_idx = np.flatnonzero(precip > threshold)
    if wet_idx.size == 0:
        return []

    ordinals = np.array([d.toordinal() for d in s.dates], dtype=np.int64)
    adjacent = (np.diff(wet_idx) == 1) & (np.diff(ordinals[wet_idx]) == 1)
    starts = np.flatnonzero(np.concatenate(([True], ~adjacent)))

    values = precip[wet_idx]
    totals = np.add.reduceat(values, starts)
    maxima = np.maximum.reduceat(values, starts)
    durations = np.diff(np.append(starts, wet_idx.size))

    periods = [
        WetPeriod(
            start_index=int(wet_idx[st]),
            start_date=s.dates[int(wet_idx[st])],
            duration_days=int(d),
            total_volume_mm=float(t),
            max_daily_mm=float(mx),
        )
        for st, d, t, mx in zip(starts, durations, totals, maxima)
    ]
    pipeline_logger.debug(f"{len(periods)} wet periods above {threshold} mm in {len(s)} days")
    return periods


def wet_period_columns(periods: Sequence[WetPeriod]) -> WetPeriodColumns:
    return WetPeriodColumns(
        durations=[p.duration_days for p in periods],
        totals=[p.total_volume_mm for p in periods],
        maxima=[p.max_daily_mm for p in periods],
        start_dates=[p.start_date for p in periods],
    )


# ============================================================================
# CSV OUTPUT
# ============================================================================

def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip form
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], delimiter: str = ",") -> str:
    """CSV text with the version line, a header row and losslessly formatted cells"""
    frame = pd.DataFrame([[_cell(v) for v in row] for row in rows], columns=list(header), dtype=object)
    body = frame.to_csv(sep=delimiter, index=False, lineterminator="\n")
    return f"{CSV_VERSION_LINE}\n{body}"


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]], delimiter: str = ",") -> Path:
    """
    Write format_csv output, creating parent directories

    Raises:
        DataValidationError: If the file or its directory cannot be written
    """
    path = Path(path)
    text = format_csv(header, rows, delimiter)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="UTF-8")
    except OSError as e:
        pipeline_logger.error(f"Cannot write {path}: {e}")
        raise DataValidationError(f"cannot write {path}: {e.strerror or e}", details={"path": str(path)})
    pipeline_logger.info(f"Wrote {path}")
    return path


def read_csv_text(text: str, delimiter: str = ",") -> Tuple[List[str], List[List[str]]]:
    """
    Parse text produced by format_csv

    Raises:
        DataValidationError: Missing or unknown version line
    """
    first, _, rest = text.partition("\n")
    if first.strip() != CSV_VERSION_LINE:
        raise DataValidationError(f"expected version line {CSV_VERSION_LINE!r}, found {first.strip()!r}", line=1)

    try:
        frame = pd.read_csv(StringIO(rest), sep=delimiter, dtype=str, keep_default_na=False)
    except EmptyDataError:
        raise DataValidationError("missing header row", line=2)
    return [str(c) for c in frame.columns], frame.to_numpy().tolist()


def read_csv(path: PathLike, delimiter: str = ",") -> Tuple[List[str], List[List[str]]]:
    return read_csv_text(Path(path).read_text(encoding="UTF-8"), delimiter)
