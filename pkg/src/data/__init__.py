"""Event ingestion: records, taxonomy and daily count structures."""
from .models import DailyCounts, EventRecord, Taxonomy, Window
from .ingest import (
    aggregate,
    load_taxonomy,
    parse_event_files,
    parse_events,
    write_daily_counts,
    write_events,
)

__all__ = [
    "DailyCounts",
    "EventRecord",
    "Taxonomy",
    "Window",
    "aggregate",
    "load_taxonomy",
    "parse_event_files",
    "parse_events",
    "write_daily_counts",
    "write_events",
]
