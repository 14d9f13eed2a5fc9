"""Domain types shared by all analysis modules.

Event records come in one (feature, activity) pair per row; a taxonomy maps
every term of both repertoires onto a class; ``DailyCounts`` is the dense
features x activities x days count array everything downstream is built from.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Dict, Iterator, List, Literal, Optional

import numpy as np
import pandas as pd

from ..errors import InputValidationError
from ..spectral.wavelet import TimeSeries

NodeKind = Literal["feature", "activity"]
Grouping = Literal["full", "grouped"]

NODE_KINDS = ("feature", "activity")


@dataclass(frozen=True)
class Window:
    """Inclusive calendar-day range."""
    start: date
    end: date

    def __post_init__(self):
        if self.end < self.start:
            raise InputValidationError(
                f"empty window: {self.start.isoformat()} is after {self.end.isoformat()}"
            )

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse ``YYYY-MM-DD:YYYY-MM-DD``."""
        try:
            left, right = text.split(":")
            return cls(date.fromisoformat(left.strip()), date.fromisoformat(right.strip()))
        except ValueError as e:
            if isinstance(e, InputValidationError):
                raise
            raise InputValidationError(f"bad window '{text}', expected YYYY-MM-DD:YYYY-MM-DD") from e

    @classmethod
    def year(cls, year: int) -> "Window":
        return cls(date(year, 1, 1), date(year, 12, 31))

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, self.end, freq="D")

    def contains(self, day: date) -> bool:
        return self.start <= day <= self.end

    def intersect(self, other: "Window") -> Optional["Window"]:
        start, end = max(self.start, other.start), min(self.end, other.end)
        return Window(start, end) if start <= end else None

    def years(self) -> List["Window"]:
        """Split into calendar-year blocks clipped to the window."""
        blocks = []
        for year in range(self.start.year, self.end.year + 1):
            block = self.intersect(Window.year(year))
            if block is not None:
                blocks.append(block)
        return blocks

    def preceding(self, start: date) -> Optional["Window"]:
        """Window from ``start`` up to the day before this window."""
        end = self.start - timedelta(days=1)
        return Window(start, end) if start <= end else None

    def __str__(self) -> str:
        return f"{self.start.isoformat()}:{self.end.isoformat()}"


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One observed co-occurrence of a feature and an activity."""
    date: date
    feature: str
    activity: str
    user: str
    count: int = 1


@dataclass
class Taxonomy:
    """Term -> class mapping for both node kinds."""
    features: Dict[str, str] = field(default_factory=dict)
    activities: Dict[str, str] = field(default_factory=dict)

    def mapping(self, kind: NodeKind) -> Dict[str, str]:
        if kind == "feature":
            return self.features
        if kind == "activity":
            return self.activities
        raise InputValidationError(f"unknown node kind '{kind}'")

    def terms(self, kind: NodeKind) -> List[str]:
        return sorted(self.mapping(kind))

    def classes(self, kind: NodeKind) -> List[str]:
        return sorted(set(self.mapping(kind).values()))

    def labels(self, kind: NodeKind, grouping: Grouping) -> List[str]:
        return self.terms(kind) if grouping == "full" else self.classes(kind)

    def contains(self, kind: NodeKind, term: str) -> bool:
        return term in self.mapping(kind)

    def class_of(self, kind: NodeKind, term: str) -> str:
        try:
            return self.mapping(kind)[term]
        except KeyError:
            raise InputValidationError(f"term '{term}' is not in the {kind} repertoire") from None

    def label_of(self, kind: NodeKind, term: str, grouping: Grouping) -> str:
        return term if grouping == "full" else self.class_of(kind, term)

    def has_class(self, kind: NodeKind, name: str) -> bool:
        return name in set(self.mapping(kind).values())

    def cardinality(self, kind: NodeKind) -> Dict[str, int]:
        """Number of terms per class."""
        report: Dict[str, int] = {}
        for cls in self.mapping(kind).values():
            report[cls] = report.get(cls, 0) + 1
        return dict(sorted(report.items()))

    def check_sizes(
        self, kind: NodeKind, n_terms: Optional[int] = None, n_classes: Optional[int] = None
    ) -> None:
        """Check declared repertoire sizes against the loaded mapping."""
        terms, classes = len(self.mapping(kind)), len(self.classes(kind))
        if n_terms is not None and terms != n_terms:
            raise InputValidationError(f"{kind} repertoire has {terms} terms, expected {n_terms}")
        if n_classes is not None and classes != n_classes:
            raise InputValidationError(f"{kind} taxonomy has {classes} classes, expected {n_classes}")

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"kind": kind, "term": term, "class": cls}
            for kind in NODE_KINDS
            for term, cls in sorted(self.mapping(kind).items())
        ]
        return pd.DataFrame(rows, columns=["kind", "term", "class"])


@dataclass
class DailyCounts:
    """Dense count array indexed (feature, activity, day).

    ``users``, when present, holds the number of distinct users per
    cell-day. The day axis is contiguous with explicit zeros for silent days.
    """
    features: List[str]
    activities: List[str]
    days: pd.DatetimeIndex
    counts: np.ndarray
    grouping: Grouping = "full"
    users: Optional[np.ndarray] = None

    def __post_init__(self):
        expected = (len(self.features), len(self.activities), len(self.days))
        if self.counts.shape != expected:
            raise InputValidationError(f"counts shape {self.counts.shape} does not match labels {expected}")
        if self.users is not None and self.users.shape != expected:
            raise InputValidationError("user-count array does not match the count array")

    @property
    def window(self) -> Window:
        return Window(self.days[0].date(), self.days[-1].date())

    def total(self) -> int:
        return int(self.counts.sum())

    def _day_slice(self, start: Optional[date], end: Optional[date]) -> slice:
        start = start or self.days[0].date()
        end = end or self.days[-1].date()
        if end < start:
            raise InputValidationError(f"empty day range {start}:{end}")
        if start < self.days[0].date() or end > self.days[-1].date():
            raise InputValidationError(f"day range {start}:{end} is outside the counts window {self.window}")
        i = (start - self.days[0].date()).days
        j = (end - self.days[0].date()).days + 1
        return slice(i, j)

    def slice_days(self, start: Optional[date] = None, end: Optional[date] = None) -> "DailyCounts":
        sl = self._day_slice(start, end)
        return DailyCounts(
            features=list(self.features),
            activities=list(self.activities),
            days=self.days[sl],
            counts=self.counts[:, :, sl].copy(),
            grouping=self.grouping,
            users=None if self.users is None else self.users[:, :, sl].copy(),
        )

    def sum_days(self, start: Optional[date] = None, end: Optional[date] = None) -> np.ndarray:
        """Features x activities totals over a day range."""
        return self.counts[:, :, self._day_slice(start, end)].sum(axis=2)

    def pool(self, taxonomy: Taxonomy) -> "DailyCounts":
        """Pool term-level counts into class-level counts."""
        if self.grouping == "grouped":
            return self
        f_classes = taxonomy.classes("feature")
        a_classes = taxonomy.classes("activity")
        f_index = np.array([f_classes.index(taxonomy.class_of("feature", t)) for t in self.features], dtype=int)
        a_index = np.array([a_classes.index(taxonomy.class_of("activity", t)) for t in self.activities], dtype=int)
        pooled = np.zeros((len(f_classes), len(a_classes), len(self.days)), dtype=self.counts.dtype)
        np.add.at(pooled, (f_index[:, None], a_index[None, :]), self.counts)
        # distinct users cannot be pooled from per-cell counts
        return DailyCounts(f_classes, a_classes, self.days, pooled, grouping="grouped")

    def __add__(self, other: "DailyCounts") -> "DailyCounts":
        if (
            self.features != other.features
            or self.activities != other.activities
            or not self.days.equals(other.days)
        ):
            raise InputValidationError("cannot combine counts with different axes")
        users = None
        if self.users is not None and other.users is not None:
            users = self.users + other.users
        return DailyCounts(
            list(self.features), list(self.activities), self.days,
            self.counts + other.counts, self.grouping, users,
        )

    # --- time series views ---

    def _series(self, values: np.ndarray, name: str) -> TimeSeries:
        return TimeSeries(start=self.days[0].date(), values=values.astype(float), name=name)

    def total_series(self) -> TimeSeries:
        return self._series(self.counts.sum(axis=(0, 1)), "total")

    def feature_series(self, label: str) -> TimeSeries:
        return self._series(self.counts[self._index(self.features, label, "feature")].sum(axis=0), label)

    def activity_series(self, label: str) -> TimeSeries:
        return self._series(self.counts[:, self._index(self.activities, label, "activity")].sum(axis=0), label)

    def pair_series(self, feature: str, activity: str) -> TimeSeries:
        f = self._index(self.features, feature, "feature")
        a = self._index(self.activities, activity, "activity")
        return self._series(self.counts[f, a], f"{feature} x {activity}")

    @staticmethod
    def _index(labels: List[str], label: str, kind: str) -> int:
        try:
            return labels.index(label)
        except ValueError:
            raise InputValidationError(f"{kind} '{label}' is not on the count axes") from None

    def iter_cells(self) -> Iterator[tuple]:
        """Yield (day, feature, activity, count) for non-zero cells in sorted order."""
        f_idx, a_idx, d_idx = np.nonzero(self.counts)
        order = np.lexsort((a_idx, f_idx, d_idx))
        for k in order:
            yield (
                self.days[d_idx[k]].date(),
                self.features[f_idx[k]],
                self.activities[a_idx[k]],
                int(self.counts[f_idx[k], a_idx[k], d_idx[k]]),
            )

    def to_frame(self) -> pd.DataFrame:
        """Long format, non-zero cells only."""
        rows = [
            {"date": d.isoformat(), "feature": f, "activity": a, "count": c}
            for d, f, a, c in self.iter_cells()
        ]
        return pd.DataFrame(rows, columns=["date", "feature", "activity", "count"])
