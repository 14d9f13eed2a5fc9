"""User-weighted networks and new-user turnover.

A user is new on day d when d is their first in-scope appearance across the
warmup and the analysis window. The scope is either all CES records or one
feature class x activity class pair.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .data.models import EventRecord, Grouping, Taxonomy, Window
from .errors import InputValidationError
from .network.bipartite import BipartiteNetwork
from .spectral.wavelet import TimeSeries

log = logging.getLogger(__name__)

GLOBAL_SCOPE = "all"


@dataclass(frozen=True)
class Scope:
    feature_class: Optional[str] = None
    activity_class: Optional[str] = None

    def __post_init__(self):
        if (self.feature_class is None) != (self.activity_class is None):
            raise InputValidationError("a pair scope needs both a feature class and an activity class")

    @property
    def is_global(self) -> bool:
        return self.feature_class is None

    @property
    def label(self) -> str:
        return GLOBAL_SCOPE if self.is_global else f"{self.feature_class} x {self.activity_class}"

    def check(self, taxonomy: Taxonomy) -> None:
        if self.is_global:
            return
        if not taxonomy.has_class("feature", self.feature_class):
            raise InputValidationError(f"empty scope: no feature class '{self.feature_class}'")
        if not taxonomy.has_class("activity", self.activity_class):
            raise InputValidationError(f"empty scope: no activity class '{self.activity_class}'")


@dataclass
class TurnoverSeries:
    scope: str
    frame: pd.DataFrame

    @property
    def ratio(self) -> pd.Series:
        return self.frame["ratio"]

    def to_frame(self) -> pd.DataFrame:
        """``date,scope,active_users,new_users,ratio``."""
        out = self.frame.reset_index()
        out["date"] = out["date"].dt.strftime("%Y-%m-%d")
        out.insert(1, "scope", self.scope)
        return out[["date", "scope", "active_users", "new_users", "ratio"]]

    def ratio_series(self) -> TimeSeries:
        """Ratio as a series; days without active users become 0."""
        values = self.ratio.to_numpy(dtype=float)
        missing = int(np.isnan(values).sum())
        if missing:
            log.warning(f"[Turnover] {missing} days without active users set to 0 in the ratio series")
        return TimeSeries(self.frame.index[0].date(), np.nan_to_num(values, nan=0.0), f"new_user_ratio {self.scope}")


def _records_frame(records: Sequence[EventRecord], taxonomy: Taxonomy) -> pd.DataFrame:
    frame = pd.DataFrame(
        [(r.date, r.feature, r.activity, r.user) for r in records],
        columns=["date", "feature", "activity", "user"],
    )
    if frame.empty:
        return frame.assign(feature_class=[], activity_class=[])
    if (frame["user"].astype(str).str.strip() == "").any():
        raise InputValidationError("records without a user pseudonym cannot be used for user statistics")
    frame["date"] = pd.to_datetime(frame["date"])
    frame["feature_class"] = frame["feature"].map(taxonomy.features)
    frame["activity_class"] = frame["activity"].map(taxonomy.activities)
    return frame


def _in_scope(frame: pd.DataFrame, scope: Scope) -> pd.DataFrame:
    if scope.is_global or frame.empty:
        return frame
    keep = (frame["feature_class"] == scope.feature_class) & (frame["activity_class"] == scope.activity_class)
    return frame[keep]


def _between(frame: pd.DataFrame, window: Window) -> pd.DataFrame:
    if frame.empty:
        return frame
    start, end = pd.Timestamp(window.start), pd.Timestamp(window.end)
    return frame[(frame["date"] >= start) & (frame["date"] <= end)]


def user_network(
    records: Sequence[EventRecord],
    taxonomy: Taxonomy,
    grouping: Grouping = "full",
    window: Optional[Window] = None,
) -> BipartiteNetwork:
    """W[f, a] = number of distinct users with at least one record on (f, a)."""
    features = taxonomy.labels("feature", grouping)
    activities = taxonomy.labels("activity", grouping)
    frame = _records_frame(records, taxonomy)
    if window is not None:
        frame = _between(frame, window)
    weights = np.zeros((len(features), len(activities)))
    if not frame.empty:
        f_col, a_col = ("feature", "activity") if grouping == "full" else ("feature_class", "activity_class")
        distinct = frame.drop_duplicates([f_col, a_col, "user"]).groupby([f_col, a_col]).size()
        table = distinct.unstack(fill_value=0).reindex(index=features, columns=activities, fill_value=0)
        weights = table.to_numpy(dtype=float)
    log.info(f"[Turnover] User network {len(features)}x{len(activities)} from {int(frame['user'].nunique()) if not frame.empty else 0} users")
    return BipartiteNetwork(features, activities, weights)


def new_user_ratio(
    records: Sequence[EventRecord],
    taxonomy: Taxonomy,
    window: Window,
    scope: Optional[Scope] = None,
    warmup: Optional[Window] = None,
) -> TurnoverSeries:
    """Daily active users, new users and their ratio over ``window``.

    Without ``warmup`` all records before the window serve as history.
    Days with no active users get a NaN ratio.
    """
    scope = scope or Scope()
    scope.check(taxonomy)
    if warmup is not None and warmup.end >= window.start:
        raise InputValidationError(f"warmup {warmup} must end before the window {window} starts")

    frame = _in_scope(_records_frame(records, taxonomy), scope)
    history_end = pd.Timestamp(window.end)
    if not frame.empty:
        frame = frame[frame["date"] <= history_end]
        if warmup is not None:
            # records between warmup and window are not history
            in_warmup = _between(frame, warmup)
            frame = pd.concat([in_warmup, _between(frame, window)])

    days = pd.DatetimeIndex(window.dates(), name="date")
    if frame.empty:
        active = pd.Series(0, index=days)
        new = pd.Series(0, index=days)
    else:
        first_seen = frame.groupby("user")["date"].min()
        visits = _between(frame, window).drop_duplicates(["date", "user"])
        is_new = visits["user"].map(first_seen) == visits["date"]
        active = visits.groupby("date").size().reindex(days, fill_value=0)
        new = visits[is_new].groupby("date").size().reindex(days, fill_value=0)

    ratio = (new / active.where(active > 0)).astype(float)
    result = pd.DataFrame(
        {"active_users": active.astype(int), "new_users": new.astype(int), "ratio": ratio}, index=days
    )
    log.info(
        f"[Turnover] {scope.label}: {int(result['new_users'].sum()):,} new of "
        f"{int(result['active_users'].sum()):,} daily active users over {window}"
    )
    return TurnoverSeries(scope.label, result)


def daily_users(
    records: Sequence[EventRecord],
    taxonomy: Taxonomy,
    window: Window,
    scope: Optional[Scope] = None,
) -> TimeSeries:
    """Distinct active users per day in scope."""
    scope = scope or Scope()
    scope.check(taxonomy)
    frame = _between(_in_scope(_records_frame(records, taxonomy), scope), window)
    days = pd.DatetimeIndex(window.dates(), name="date")
    if frame.empty:
        counts = pd.Series(0, index=days)
    else:
        counts = frame.drop_duplicates(["date", "user"]).groupby("date").size().reindex(days, fill_value=0)
    return TimeSeries(window.start, counts.to_numpy(dtype=float), f"daily_users {scope.label}")
