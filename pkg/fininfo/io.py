"""Reading price/return files and writing result tables.

Input formats
-------------
CSV with a header row. Price files use ``date,price``; return files use the
``timestamp,value`` columns every subcommand emits, so output of one run (for
example ``synth``) can feed the next. Dates are ISO-8601. Prices are taken as
already adjusted for dividends and splits.

JSON input is a list of records with the same keys::

    [{"date": "2020-01-02", "price": 100.0}, ...]

Output formats
--------------
CSV with a ``timestamp`` first column and floats printed with 9 significant
digits, or JSON records with the same rounding. With ``plot_data`` the table is
melted into long ``timestamp,series,value`` rows for external plotting.
"""

from __future__ import annotations

import io as _io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Literal, NamedTuple

import numpy as np
import pandas as pd

from fininfo.errors import EmptyInputError, IngestionError
from fininfo.finance import log_returns
from fininfo.series import PriceSeries, ReturnSeries

logger = logging.getLogger(__name__)

Format = Literal["csv", "json"]

FLOAT_FORMAT = "%.9g"

_TIME_COLUMNS = ("date", "timestamp")
_PRICE_COLUMNS = ("price",)
_RETURN_COLUMNS = ("value", "return")


# ── Reading ─────────────────────────────────────────────────────────────────


def _read_raw(path: Path, fmt: Format) -> tuple[pd.DataFrame, int]:
    """Raw string table plus the file line number of its first data row."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"{path}: no such file")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise EmptyInputError(f"{path}: file is empty")
    if fmt == "json":
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from None
        if not isinstance(records, list):
            raise IngestionError(f"{path}: expected a list of records")
        if not records:
            raise EmptyInputError(f"{path}: no records")
        frame = pd.DataFrame.from_records(records).astype(str)
        # Records have no line numbers; report 1-based record positions instead.
        return frame, 1
    try:
        frame = pd.read_csv(_io.StringIO(text), dtype=str, skipinitialspace=True)
    except pd.errors.ParserError as exc:
        raise IngestionError(f"{path}: {exc}") from None
    if frame.empty:
        raise EmptyInputError(f"{path}: header but no data rows")
    return frame, 2


class _Rows(NamedTuple):
    index: pd.DatetimeIndex
    values: np.ndarray
    lines: np.ndarray
    column: str


def _pick(frame: pd.DataFrame, candidates: tuple[str, ...]) -> str | None:
    columns = {str(c).strip().lower(): c for c in frame.columns}
    for name in candidates:
        if name in columns:
            return columns[name]
    return None


def _row_error(path: Path, fmt: Format, line: int, message: str) -> IngestionError:
    if fmt == "json":
        return IngestionError(f"{path}: record {line}: {message}")
    return IngestionError(f"{path}: {message}", line=line)


def _parse_rows(
    path: Path,
    fmt: Format,
    value_columns: tuple[str, ...],
    *,
    strict: bool,
) -> _Rows:
    """Parse (timestamp, value) rows, time-sorted, keeping each row's file line."""
    frame, first_line = _read_raw(path, fmt)
    time_col = _pick(frame, _TIME_COLUMNS)
    value_col = _pick(frame, value_columns)
    if time_col is None or value_col is None:
        raise IngestionError(
            f"{path}: expected columns {_TIME_COLUMNS[0]!r}/{_TIME_COLUMNS[1]!r} and one of"
            f" {list(value_columns)}, got {list(frame.columns)}",
            line=1 if fmt == "csv" else None,
        )
    stamps = pd.to_datetime(frame[time_col], errors="coerce", format="ISO8601")
    values = pd.to_numeric(frame[value_col], errors="coerce").to_numpy(dtype=float)
    lines = np.arange(first_line, first_line + len(frame))

    for i, line in enumerate(lines):
        if pd.isna(stamps.iloc[i]):
            raise _row_error(path, fmt, line, f"unparseable date {frame[time_col].iloc[i]!r}")
        if not math.isfinite(values[i]):
            raise _row_error(path, fmt, line, f"unparseable value {frame[value_col].iloc[i]!r}")

    index = pd.DatetimeIndex(stamps, name="timestamp")
    dup = index.duplicated()
    if dup.any():
        i = int(np.argmax(dup))
        raise _row_error(path, fmt, lines[i], f"duplicate date {index[i].date()}")

    if not index.is_monotonic_increasing:
        i = int(np.argmax(np.diff(index.asi8) < 0)) + 1
        if strict:
            raise _row_error(path, fmt, lines[i], "dates are not in increasing order")
        logger.warning("%s: rows are not time-sorted; sorting", path)
    order = np.argsort(index.asi8, kind="stable")
    return _Rows(index[order], values[order], lines[order], str(value_col).strip().lower())


def _prices_from(rows: _Rows, path: Path, fmt: Format) -> PriceSeries:
    bad = np.flatnonzero(rows.values <= 0)
    if bad.size:
        first = bad[np.argmin(rows.lines[bad])]
        raise _row_error(
            path, fmt, rows.lines[first], f"non-positive price {rows.values[first]!r}"
        )
    return PriceSeries(rows.index, rows.values)


def load_prices(path: Path | str, fmt: Format = "csv", *, strict: bool = False) -> PriceSeries:
    """Read a ``date,price`` file into a time-sorted PriceSeries.

    Raises:
        EmptyInputError: the file has no data rows.
        IngestionError: unparseable, duplicate or non-positive rows (with the
            offending line number), or unsorted rows when ``strict``.
    """
    path = Path(path)
    return _prices_from(_parse_rows(path, fmt, _PRICE_COLUMNS, strict=strict), path, fmt)


def load_returns(
    path: Path | str,
    fmt: Format = "csv",
    *,
    strict: bool = False,
    column: str | None = None,
) -> ReturnSeries:
    """Read a price file (converted to log returns) or an emitted return table.

    A ``price`` column selects price semantics; otherwise a ``value`` (or
    ``return``) column is read as log returns directly. ``column`` picks a
    specific column instead, such as ``x`` or ``y`` of a synthetic pair.
    """
    path = Path(path)
    candidates = (column.lower(),) if column else _PRICE_COLUMNS + _RETURN_COLUMNS
    rows = _parse_rows(path, fmt, candidates, strict=strict)
    if rows.column in _PRICE_COLUMNS:
        return log_returns(_prices_from(rows, path, fmt))
    return ReturnSeries(rows.index, rows.values)


def load_series(path: Path | str, fmt: Format = "csv") -> pd.DataFrame:
    """Re-ingest a table written by ``write_table`` (wide format)."""
    path = Path(path)
    frame, _ = _read_raw(path, fmt)
    if "timestamp" not in frame.columns:
        raise IngestionError(f"{path}: no timestamp column", line=1 if fmt == "csv" else None)
    if fmt == "csv":
        frame = pd.read_csv(path, index_col="timestamp", parse_dates=["timestamp"])
    else:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
        frame = pd.DataFrame.from_records(records)
        frame["timestamp"] = pd.to_datetime(frame["timestamp"], format="ISO8601")
        frame = frame.set_index("timestamp")
    return frame


# ── Writing ─────────────────────────────────────────────────────────────────


def _as_frame(table: pd.DataFrame | pd.Series) -> pd.DataFrame:
    frame = table.to_frame() if isinstance(table, pd.Series) else table.copy()
    frame.index = pd.Index(frame.index, name="timestamp")
    return frame


def _timestamp_strings(index: pd.Index) -> list[str]:
    if isinstance(index, pd.DatetimeIndex):
        if (index == index.normalize()).all():
            return list(index.strftime("%Y-%m-%d"))
        return [ts.isoformat() for ts in index]
    return [str(v) for v in index]


def _json_value(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float(FLOAT_FORMAT % value)
    return value


def format_table(
    table: pd.DataFrame | pd.Series,
    fmt: Format = "csv",
    *,
    plot_data: bool = False,
) -> str:
    frame = _as_frame(table)
    frame.index = pd.Index(_timestamp_strings(frame.index), name="timestamp")
    if plot_data:
        # Row-major (timestamp, series) pairs; flags plot as 0/1.
        frame = (
            frame.astype(float)
            .rename_axis(columns="series")
            .stack(future_stack=True)
            .rename("value")
            .reset_index()
        )
    else:
        frame = frame.reset_index()
    if fmt == "json":
        records = [
            {str(k): _json_value(v) for k, v in row.items()}
            for row in frame.to_dict(orient="records")
        ]
        return json.dumps(records, indent=1) + "\n"
    buf = _io.StringIO()
    frame.to_csv(buf, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buf.getvalue()


def write_table(
    table: pd.DataFrame | pd.Series,
    path: Path | str | None = None,
    fmt: Format = "csv",
    *,
    plot_data: bool = False,
) -> str:
    """Write ``table`` to ``path`` (stdout when None) and return the text written."""
    text = format_table(table, fmt, plot_data=plot_data)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
        logger.info("wrote %d rows to %s", len(table), path)
    return text


def format_record(record: dict[str, Any], fmt: Format = "csv") -> str:
    """One-row result (a summary or a single number) as CSV or a JSON object."""
    if fmt == "json":
        return json.dumps({k: _json_value(v) for k, v in record.items()}, indent=1) + "\n"
    cells = [
        FLOAT_FORMAT % v if isinstance(v, (float, np.floating)) else str(v)
        for v in record.values()
    ]
    return ",".join(record) + "\n" + ",".join(cells) + "\n"


def write_record(
    record: dict[str, Any],
    path: Path | str | None = None,
    fmt: Format = "csv",
) -> str:
    text = format_record(record, fmt)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text
