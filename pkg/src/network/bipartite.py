"""Weighted bipartite network of nature features (rows) x activities (columns)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from ..data.models import DailyCounts
from ..errors import InputValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BipartiteNetwork:
    """Labeled nonnegative weight matrix with marginals."""
    features: List[str]
    activities: List[str]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape != (len(self.features), len(self.activities)):
            raise InputValidationError(
                f"weight matrix {w.shape} does not match {len(self.features)}x{len(self.activities)} labels"
            )
        if not np.all(np.isfinite(w)):
            raise InputValidationError("weight matrix contains non-finite entries")
        if np.any(w < 0):
            raise InputValidationError("weight matrix contains negative entries")
        if len(set(self.features)) != len(self.features) or len(set(self.activities)) != len(self.activities):
            raise InputValidationError("node labels must be unique within each kind")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_matrix(cls, weights, features: Optional[List[str]] = None, activities: Optional[List[str]] = None):
        w = np.asarray(weights, dtype=float)
        features = features or [f"f{i}" for i in range(w.shape[0])]
        activities = activities or [f"a{j}" for j in range(w.shape[1])]
        return cls(list(features), list(activities), w)

    @property
    def shape(self):
        return self.weights.shape

    @property
    def row_totals(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def retained(self) -> "BipartiteNetwork":
        """Drop nodes with zero marginal."""
        rows = self.row_totals > 0
        cols = self.col_totals > 0
        if rows.all() and cols.all():
            return self
        dropped = [f for f, keep in zip(self.features, rows) if not keep]
        dropped += [a for a, keep in zip(self.activities, cols) if not keep]
        log.debug(f"[Network] Dropping {len(dropped)} zero-marginal nodes: {', '.join(dropped)}")
        return BipartiteNetwork(
            [f for f, keep in zip(self.features, rows) if keep],
            [a for a, keep in zip(self.activities, cols) if keep],
            self.weights[np.ix_(rows, cols)],
        )

    def scaled(self, factor: float) -> "BipartiteNetwork":
        return BipartiteNetwork(list(self.features), list(self.activities), self.weights * factor)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.weights, index=pd.Index(self.features, name="feature"), columns=self.activities)
        return frame

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, encoding="utf-8", lineterminator="\n", float_format="%.10g")
        return path

    @classmethod
    def read_csv(cls, path: str | Path) -> "BipartiteNetwork":
        """Labeled matrix: first column ``feature``, other headers are activities."""
        path = Path(path)
        try:
            frame = pd.read_csv(path, index_col=0, encoding="utf-8")
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InputValidationError(f"cannot read {path}: {e}") from e
        try:
            weights = frame.apply(pd.to_numeric).to_numpy(dtype=float)
        except (ValueError, TypeError) as e:
            raise InputValidationError(f"{path.name}: non-numeric weight ({e})") from e
        return cls([str(f) for f in frame.index], [str(a) for a in frame.columns], weights)


def build_network(
    counts: DailyCounts, start: Optional[date] = None, end: Optional[date] = None
) -> BipartiteNetwork:
    """W[f, a] = sum of counts[f, a, d] over the day range."""
    weights = counts.sum_days(start, end)
    return BipartiteNetwork(list(counts.features), list(counts.activities), weights.astype(float))
