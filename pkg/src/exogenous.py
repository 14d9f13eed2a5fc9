"""Government-response stringency: per-country tables, the daily median over a
country list, and alignment with CES series.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import get_settings
from .data.models import Window
from .errors import InputValidationError
from .spectral.wavelet import TimeSeries

log = logging.getLogger(__name__)

ALPHA2_TO_ALPHA3 = {
    "GB": "GBR",
    "UK": "GBR",
    "US": "USA",
    "CA": "CAN",
    "AU": "AUS",
    "NZ": "NZL",
    "IE": "IRL",
}

# normalized header -> canonical column
COLUMN_ALIASES = {
    "countrycode": "country",
    "country": "country",
    "iso3": "country",
    "date": "date",
    "stringencyindex": "stringency",
    "stringency": "stringency",
    "stringencyindexaverage": "stringency",
    "stringencyindexfordisplay": "stringency",
    "stringencyindexaveragefordisplay": "stringency",
}


def country_code(code: str) -> str:
    code = code.strip().upper()
    return ALPHA2_TO_ALPHA3.get(code, code)


def _normalize_header(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", name.lower())


def _parse_dates(values: pd.Series) -> pd.Series:
    text = values.astype(str).str.strip()
    compact = text.str.fullmatch(r"\d{8}")
    parsed = pd.Series(pd.NaT, index=text.index, dtype="datetime64[ns]")
    parsed[compact] = pd.to_datetime(text[compact], format="%Y%m%d", errors="coerce")
    parsed[~compact] = pd.to_datetime(text[~compact], format="%Y-%m-%d", errors="coerce")
    return parsed


def load_stringency_table(path: str | Path) -> pd.DataFrame:
    """Read an OxCGRT-style CSV into ``country,date,stringency`` rows.

    Rows without a stringency value are dropped; malformed dates and values
    outside [0, 100] are errors.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise InputValidationError(f"file not found: {path}") from e
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputValidationError(f"cannot read {path}: {e}") from e

    rename = {}
    for column in raw.columns:
        canonical = COLUMN_ALIASES.get(_normalize_header(column))
        if canonical and canonical not in rename.values():
            rename[column] = canonical
    table = raw.rename(columns=rename)
    missing = [c for c in ("country", "date", "stringency") if c not in table.columns]
    if missing:
        raise InputValidationError(f"{path.name}: stringency table is missing columns {missing}")
    table = table[["country", "date", "stringency"]].copy()
    return _clean_table(table, path.name)


def _clean_table(table: pd.DataFrame, source: str = "table") -> pd.DataFrame:
    table = table.copy()
    table["stringency"] = table["stringency"].astype(str).str.strip()
    table = table[table["stringency"] != ""].copy()
    try:
        table["stringency"] = table["stringency"].astype(float)
    except ValueError as e:
        raise InputValidationError(f"{source}: non-numeric stringency value ({e})") from e
    table = table[table["stringency"].notna()]

    table["date"] = _parse_dates(table["date"])
    bad_dates = table["date"].isna()
    if bad_dates.any():
        # header is line 1
        raise InputValidationError(f"{source}: malformed dates", lines=(table.index[bad_dates] + 2).tolist())
    out_of_range = (table["stringency"] < 0) | (table["stringency"] > 100)
    if out_of_range.any():
        raise InputValidationError(
            f"{source}: stringency outside [0, 100]", lines=(table.index[out_of_range] + 2).tolist()
        )
    table["country"] = table["country"].astype(str).map(country_code)
    return table.reset_index(drop=True)


@dataclass(frozen=True, eq=False)
class StringencySeries:
    series: TimeSeries
    countries: List[str]

    @property
    def start(self) -> date:
        return self.series.start

    @property
    def values(self) -> np.ndarray:
        return self.series.values

    def to_frame(self) -> pd.DataFrame:
        return self.series.to_frame().rename(columns={"value": "stringency"})

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, encoding="utf-8", lineterminator="\n", float_format="%.10g")
        return path


def median_stringency(table: pd.DataFrame, countries: Optional[Sequence[str]] = None) -> StringencySeries:
    """Per-day median over the listed countries that report that day.

    The date axis runs from the first to the last reported day; days with no
    report from any listed country take the previous value.
    """
    wanted = [country_code(c) for c in (countries or get_settings().country_list)]
    if "country" not in table.columns:
        raise InputValidationError("stringency table needs a 'country' column")
    if not np.issubdtype(table["date"].dtype, np.datetime64):
        table = _clean_table(table)
    else:
        table = table.assign(country=table["country"].astype(str).map(country_code))
    present = [c for c in wanted if c in set(table["country"])]
    absent = [c for c in wanted if c not in present]
    if not present:
        raise InputValidationError(f"none of the countries {wanted} are in the stringency table")
    if absent:
        log.warning(f"[Stringency] No data for {', '.join(absent)}")

    rows = table[table["country"].isin(present)]
    per_country = rows.groupby(["date", "country"])["stringency"].mean()
    median = per_country.groupby(level="date").median()
    days = pd.date_range(median.index.min(), median.index.max(), freq="D")
    gaps = len(days) - len(median)
    median = median.reindex(days).ffill()
    if gaps:
        log.info(f"[Stringency] Forward-filled {gaps} days without reports")
    log.info(f"[Stringency] Median of {len(present)} countries over {len(days)} days")
    return StringencySeries(TimeSeries(days[0].date(), median.to_numpy(), "stringency"), present)


def align(
    x: Union[StringencySeries, TimeSeries],
    y: TimeSeries,
    window: Optional[Window] = None,
) -> Tuple[TimeSeries, TimeSeries]:
    """Restrict both series to ``window`` ∩ y's span; fill stringency gaps.

    Gaps are forward-filled, a leading gap is back-filled from the first
    observed value. y's values are kept exactly.
    """
    xs = x.series if isinstance(x, StringencySeries) else x
    span = Window(y.start, y.end)
    target = span if window is None else span.intersect(window)
    if target is None:
        raise InputValidationError(f"empty overlap: window {window} and series {span} are disjoint")
    x_span = Window(xs.start, xs.end)
    if x_span.intersect(target) is None:
        raise InputValidationError(f"empty overlap: stringency {x_span} and {target} are disjoint")

    x_values = pd.Series(xs.values, index=xs.dates)
    full = pd.date_range(min(xs.start, target.start), target.end, freq="D")
    filled = x_values.reindex(full).ffill().bfill()
    filled = filled[pd.Timestamp(target.start):pd.Timestamp(target.end)]
    return (
        TimeSeries(target.start, filled.to_numpy(), xs.name),
        y.between(target.start, target.end),
    )
