"""Shared fixtures: a small taxonomy, event-file writers and seeded generators."""
import csv
import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Make `src` importable when pytest is run from the project root
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import get_settings  # noqa: E402
from src.data.ingest import load_taxonomy  # noqa: E402

TAXONOMY_ROWS = [
    ("feature", "park", "urban greenspace"),
    ("feature", "garden", "urban greenspace"),
    ("feature", "beach", "coast"),
    ("feature", "cliff", "coast"),
    ("feature", "river", "freshwater"),
    ("activity", "walking", "exercise"),
    ("activity", "running", "exercise"),
    ("activity", "yoga", "self care"),
    ("activity", "meditation", "self care"),
    ("activity", "photography", "creative"),
]


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch, tmp_path):
    """Fresh settings per test with outputs under tmp_path."""
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "out"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def taxonomy_file(tmp_path) -> Path:
    path = tmp_path / "taxonomy.csv"
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["kind", "term", "class"])
        writer.writerows(TAXONOMY_ROWS)
    return path


@pytest.fixture
def taxonomy(taxonomy_file):
    return load_taxonomy(taxonomy_file)


@pytest.fixture
def write_events(tmp_path):
    """Write ``(date, feature, activity, user[, count])`` rows to CSV or JSONL."""

    def write(rows, name="events.csv"):
        path = tmp_path / name
        if path.suffix == ".jsonl":
            with path.open("w", encoding="utf-8") as handle:
                for row in rows:
                    keys = ["date", "feature", "activity", "user", "count"][: len(row)]
                    handle.write(json.dumps(dict(zip(keys, row))) + "\n")
            return path
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["date", "feature", "activity", "user", "count"])
            for row in rows:
                writer.writerow(list(row) + [""] * (5 - len(row)))
        return path

    return write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
