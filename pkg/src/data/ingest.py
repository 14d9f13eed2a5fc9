"""Parse, validate and aggregate event records and taxonomy files.

Event files are CSV (header ``date,feature,activity,user[,count]``) or JSONL
with the same keys. Taxonomy files are CSV ``kind,term,class``.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import get_settings
from ..errors import InputValidationError
from .models import NODE_KINDS, DailyCounts, EventRecord, Grouping, Taxonomy, Window

log = logging.getLogger(__name__)

Policy = Literal["skip", "strict"]

EVENT_COLUMNS = ("date", "feature", "activity", "user")
TAXONOMY_COLUMNS = ("kind", "term", "class")
JSONL_SUFFIXES = {".jsonl", ".ndjson"}


class _RowProblem(Exception):
    """Internal: a row failed validation."""

    def __init__(self, message: str, unknown_term: bool = False):
        super().__init__(message)
        self.unknown_term = unknown_term


def _fold(value) -> str:
    return str(value).strip().casefold()


# === Taxonomy ===


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Load a ``kind,term,class`` mapping file.

    Every term must map to exactly one class; a term listed twice with the
    same class is tolerated, with different classes it is an error naming
    the term.
    """
    path = Path(path)
    frame = _read_csv(path)
    frame.columns = [c.strip().casefold() for c in frame.columns]
    missing = [c for c in TAXONOMY_COLUMNS if c not in frame.columns]
    if missing:
        raise InputValidationError(f"taxonomy {path.name} is missing columns: {missing}")

    taxonomy = Taxonomy()
    empty: List[int] = []
    for line, row in enumerate(frame.to_dict(orient="records"), start=2):
        kind, term, cls = _fold(row["kind"]), _fold(row["term"]), str(row["class"]).strip()
        if not kind and not term and not cls:
            continue
        if kind not in NODE_KINDS:
            raise InputValidationError(f"taxonomy {path.name}: unknown kind '{kind}'", lines=[line])
        if not term or not cls:
            empty.append(line)
            continue
        mapping = taxonomy.mapping(kind)
        previous = mapping.get(term)
        if previous is not None and previous != cls:
            raise InputValidationError(
                f"taxonomy {path.name}: {kind} term '{term}' maps to both '{previous}' and '{cls}'",
                lines=[line],
            )
        mapping[term] = cls

    if empty:
        raise InputValidationError(f"taxonomy {path.name}: empty term or class", lines=empty)
    for kind in NODE_KINDS:
        if not taxonomy.mapping(kind):
            raise InputValidationError(f"taxonomy {path.name} declares no {kind} terms")
        report = taxonomy.cardinality(kind)
        log.info(
            f"[Taxonomy] {len(taxonomy.mapping(kind))} {kind} terms in {len(report)} classes"
        )
    return taxonomy


# === Events ===


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except FileNotFoundError as e:
        raise InputValidationError(f"file not found: {path}") from e
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputValidationError(f"cannot read {path}: {e}") from e


def _iter_csv_rows(path: Path) -> Iterator[Tuple[int, Optional[dict]]]:
    frame = _read_csv(path)
    frame.columns = [c.strip().casefold() for c in frame.columns]
    missing = [c for c in EVENT_COLUMNS if c not in frame.columns]
    if missing:
        raise InputValidationError(f"{path.name}: header is missing columns {missing}", lines=[1])
    for line, row in enumerate(frame.to_dict(orient="records"), start=2):
        if all(not str(v).strip() for v in row.values()):
            continue
        yield line, row


def _iter_jsonl_rows(path: Path) -> Iterator[Tuple[int, Optional[dict]]]:
    try:
        handle = path.open(encoding="utf-8")
    except OSError as e:
        raise InputValidationError(f"cannot read {path}: {e}") from e
    with handle:
        for line, text in enumerate(handle, start=1):
            if not text.strip():
                continue
            try:
                row = json.loads(text)
            except json.JSONDecodeError:
                yield line, None
                continue
            yield line, row if isinstance(row, dict) else None


def _parse_row(row: Optional[dict], repertoire: Taxonomy) -> EventRecord:
    if row is None:
        raise _RowProblem("not a JSON object")
    values = {k: row.get(k) for k in (*EVENT_COLUMNS, "count")}
    for key in EVENT_COLUMNS:
        if values[key] is None or not str(values[key]).strip():
            raise _RowProblem(f"missing {key}")

    try:
        day = datetime.strptime(str(values["date"]).strip(), "%Y-%m-%d").date()
    except ValueError:
        raise _RowProblem(f"malformed date '{values['date']}'") from None

    raw_count = values["count"]
    count = 1
    if raw_count is not None and str(raw_count).strip():
        try:
            count = int(str(raw_count).strip())
        except ValueError:
            raise _RowProblem(f"non-integer count '{raw_count}'") from None
        if count <= 0:
            raise _RowProblem(f"count {count} <= 0")

    feature, activity = _fold(values["feature"]), _fold(values["activity"])
    if not repertoire.contains("feature", feature):
        raise _RowProblem(f"unknown feature '{feature}'", unknown_term=True)
    if not repertoire.contains("activity", activity):
        raise _RowProblem(f"unknown activity '{activity}'", unknown_term=True)

    return EventRecord(day, feature, activity, str(values["user"]).strip(), count)


def parse_events(
    path: str | Path,
    repertoire: Taxonomy,
    policy: Optional[Policy] = None,
    window: Optional[Window] = None,
) -> List[EventRecord]:
    """Parse one event file into validated records.

    Unknown terms are skipped with a warning (``policy="skip"``) or abort the
    parse (``policy="strict"``). Malformed rows (bad date, bad count, missing
    field) are collected and raised together with their line numbers. Rows
    outside ``window`` are dropped. Duplicate rows are kept.
    """
    path = Path(path)
    policy = policy or get_settings().unknown_term_policy
    rows = _iter_jsonl_rows(path) if path.suffix.lower() in JSONL_SUFFIXES else _iter_csv_rows(path)

    records: List[EventRecord] = []
    malformed: List[int] = []
    skipped = outside = 0
    for line, row in rows:
        try:
            record = _parse_row(row, repertoire)
        except _RowProblem as problem:
            if not problem.unknown_term:
                log.warning(f"[Ingest] {path.name}:{line}: {problem}")
                malformed.append(line)
            elif policy == "strict":
                raise InputValidationError(f"{path.name}: {problem}", lines=[line]) from None
            else:
                log.warning(f"[Ingest] {path.name}:{line}: {problem} - row skipped")
                skipped += 1
            continue
        if window is not None and not window.contains(record.date):
            outside += 1
            continue
        records.append(record)

    if malformed:
        raise InputValidationError(f"{path.name}: {len(malformed)} malformed rows", lines=malformed)
    if outside:
        log.debug(f"[Ingest] {path.name}: {outside} rows outside {window}")
    log.info(f"[Ingest] Parsed {len(records):,} records from {path.name} ({skipped} skipped)")
    return records


def parse_event_files(
    paths: Sequence[str | Path],
    repertoire: Taxonomy,
    policy: Optional[Policy] = None,
    window: Optional[Window] = None,
    workers: Optional[int] = None,
) -> List[EventRecord]:
    """Parse several files concurrently; records are merged in input order."""
    workers = workers or get_settings().workers
    if len(paths) <= 1 or workers <= 1:
        merged: List[EventRecord] = []
        for p in paths:
            merged.extend(parse_events(p, repertoire, policy, window))
        return merged
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda p: parse_events(p, repertoire, policy, window), paths))
    return [record for part in parts for record in part]


def write_events(records: Iterable[EventRecord], path: str | Path) -> Path:
    """Write records in the CSV event format (with the count column)."""
    path = Path(path)
    frame = pd.DataFrame(
        [(r.date.isoformat(), r.feature, r.activity, r.user, r.count) for r in records],
        columns=["date", "feature", "activity", "user", "count"],
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return path


# === Aggregation ===


def records_window(records: Sequence[EventRecord]) -> Window:
    """Smallest window covering all records."""
    if not records:
        raise InputValidationError("empty window: no records and no window given")
    days = [r.date for r in records]
    return Window(min(days), max(days))


def aggregate(
    records: Sequence[EventRecord],
    taxonomy: Taxonomy,
    grouping: Grouping = "full",
    window: Optional[Window] = None,
    with_users: bool = False,
) -> DailyCounts:
    """Fold records into a dense (feature, activity, day) count array.

    ``grouping="grouped"`` pools terms into their classes. Records outside
    the window are ignored; silent days are explicit zero slices.
    """
    window = window or records_window(records)
    features = taxonomy.labels("feature", grouping)
    activities = taxonomy.labels("activity", grouping)
    f_pos: Dict[str, int] = {label: i for i, label in enumerate(features)}
    a_pos: Dict[str, int] = {label: i for i, label in enumerate(activities)}

    kept = [r for r in records if window.contains(r.date)]
    counts = np.zeros((len(features), len(activities), window.n_days), dtype=np.int64)
    users = None
    if kept:
        fi = np.fromiter((f_pos[taxonomy.label_of("feature", r.feature, grouping)] for r in kept), dtype=np.int64, count=len(kept))
        ai = np.fromiter((a_pos[taxonomy.label_of("activity", r.activity, grouping)] for r in kept), dtype=np.int64, count=len(kept))
        di = np.fromiter(((r.date - window.start).days for r in kept), dtype=np.int64, count=len(kept))
        ci = np.fromiter((r.count for r in kept), dtype=np.int64, count=len(kept))
        np.add.at(counts, (fi, ai, di), ci)
        if with_users:
            cells = pd.DataFrame({"f": fi, "a": ai, "d": di, "user": [r.user for r in kept]})
            distinct = cells.drop_duplicates()
            users = np.zeros_like(counts)
            np.add.at(users, (distinct["f"].to_numpy(), distinct["a"].to_numpy(), distinct["d"].to_numpy()), 1)
    elif with_users:
        users = np.zeros_like(counts)

    return DailyCounts(features, activities, window.dates(), counts, grouping, users)


def write_daily_counts(counts: DailyCounts, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    counts.to_frame().to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return path
