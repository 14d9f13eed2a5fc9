"""Global and node-level statistics of weighted bipartite networks.

All statistics are evaluated on the retained network: nodes whose marginal
total is zero are dropped first. Rows are features, columns are activities.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.stats import entropy

from ..errors import InputValidationError, NumericalError
from .bipartite import BipartiteNetwork
from .modularity import bipartite_modularity

log = logging.getLogger(__name__)

# totals equal to this many decimals (relative to the largest) count as tied
TOTAL_DECIMALS = 12


class NetworkStats(BaseModel):
    """The five global statistics of one network."""
    web_asymmetry: float = Field(ge=-1.0, le=1.0)
    modularity: float = Field(ge=-0.5, le=1.0)
    weighted_nestedness: float = Field(ge=0.0, le=1.0)
    interaction_asymmetry: float = Field(ge=0.0, le=1.0)
    weighted_connectance: float = Field(gt=0.0, le=1.0)
    n_features: int = Field(ge=0)
    n_activities: int = Field(ge=0)
    total_weight: float = Field(ge=0.0)


def _retained_nonempty(net: BipartiteNetwork) -> BipartiteNetwork:
    kept = net.retained()
    if kept.shape[0] == 0 or kept.shape[1] == 0:
        raise InputValidationError("empty network: no node has a non-zero marginal")
    return kept


def web_asymmetry(net: BipartiteNetwork) -> float:
    """(A - F) / (A + F) over retained nodes."""
    kept = _retained_nonempty(net)
    n_f, n_a = kept.shape
    return (n_a - n_f) / (n_a + n_f)


def weighted_connectance(net: BipartiteNetwork) -> float:
    """Quantitative connectance: weighted link density over node count.

    Each node's effective partner count is 2**H, H the base-2 Shannon entropy
    of its weight distribution; the link density averages these weighted by
    node totals over both kinds.
    """
    kept = _retained_nonempty(net)
    w = kept.weights
    m = w.sum()
    if m <= 0:
        raise NumericalError("weighted connectance is undefined for zero total weight")
    row_partners = np.exp2(entropy(w, base=2, axis=1))
    col_partners = np.exp2(entropy(w, base=2, axis=0))
    link_density = (kept.row_totals @ row_partners + kept.col_totals @ col_partners) / (2.0 * m)
    return float(link_density / (w.shape[0] + w.shape[1]))


def _snapped_totals(totals: np.ndarray) -> np.ndarray:
    """Marginal totals relative to the largest, rounded to ``TOTAL_DECIMALS``."""
    top = totals.max() if totals.size else 0.0
    if top <= 0:
        return np.zeros_like(totals, dtype=float)
    return np.round(totals / top, TOTAL_DECIMALS)


def _paired_overlap(m: np.ndarray) -> tuple[float, int]:
    """Sum of decreasing-total paired overlaps between the rows of ``m``.

    A pair (i, j) scores only when row i has a strictly larger marginal total
    than row j; the score is the share of j's non-zero cells that are
    strictly smaller than the corresponding cell of i.
    """
    n = m.shape[0]
    fill = np.count_nonzero(m, axis=1)
    total = _snapped_totals(m.sum(axis=1))
    smaller = (m[None, :, :] > 0) & (m[None, :, :] < m[:, None, :])
    eligible = (total[:, None] > total[None, :]) & (fill[None, :] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        overlap = np.where(eligible, smaller.sum(axis=2) / fill[None, :], 0.0)
    return float(overlap.sum()), n * (n - 1) // 2


def weighted_nestedness(net: BipartiteNetwork) -> float:
    """Weighted NODF scaled to [0, 1]."""
    kept = _retained_nonempty(net)
    rows, row_pairs = _paired_overlap(kept.weights)
    cols, col_pairs = _paired_overlap(kept.weights.T)
    if row_pairs + col_pairs == 0:
        raise NumericalError("weighted nestedness needs at least two rows or two columns")
    return (rows + cols) / (row_pairs + col_pairs)


def _dependencies(kept: BipartiteNetwork) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w = kept.weights
    feature_on_activity = w / kept.row_totals[:, None]
    activity_on_feature = w / kept.col_totals[None, :]
    return feature_on_activity, activity_on_feature, w > 0


def interaction_asymmetry(net: BipartiteNetwork) -> float:
    """Mean over links of |d(f->a) - d(a->f)| / max(d(f->a), d(a->f))."""
    kept = _retained_nonempty(net)
    d_fa, d_af, links = _dependencies(kept)
    diff = np.abs(d_fa - d_af)[links] / np.maximum(d_fa, d_af)[links]
    return float(diff.mean())


def push_pull(net: BipartiteNetwork) -> pd.Series:
    """Per-node push/pull in [-1, 1]; positive nodes push (partners depend on them more)."""
    kept = _retained_nonempty(net)
    d_fa, d_af, links = _dependencies(kept)
    with np.errstate(divide="ignore", invalid="ignore"):
        towards_activity = np.where(links, (d_fa - d_af) / np.maximum(d_fa, d_af), 0.0)
    degree_f = links.sum(axis=1)
    degree_a = links.sum(axis=0)
    feature_values = -towards_activity.sum(axis=1) / degree_f
    activity_values = towards_activity.sum(axis=0) / degree_a
    return _node_series(kept, feature_values, activity_values, "push_pull")


def nested_rank(net: BipartiteNetwork) -> pd.Series:
    """Scaled generality rank per kind: 0 for the largest total, 1 for the smallest.

    Ties are broken by ascending label; a kind with a single node gets 0.
    """
    kept = _retained_nonempty(net)

    def ranks(labels, totals) -> np.ndarray:
        n = len(labels)
        totals = _snapped_totals(np.asarray(totals, dtype=float))
        order = sorted(range(n), key=lambda i: (-totals[i], labels[i]))
        out = np.zeros(n)
        for position, i in enumerate(order):
            out[i] = position / (n - 1) if n > 1 else 0.0
        return out

    return _node_series(
        kept,
        ranks(kept.features, kept.row_totals),
        ranks(kept.activities, kept.col_totals),
        "nested_rank",
    )


def _node_series(kept: BipartiteNetwork, feature_values, activity_values, name: str) -> pd.Series:
    index = pd.MultiIndex.from_tuples(
        [("feature", f) for f in kept.features] + [("activity", a) for a in kept.activities],
        names=["kind", "label"],
    )
    return pd.Series(np.concatenate([feature_values, activity_values]), index=index, name=name)


def node_stats(net: BipartiteNetwork) -> pd.DataFrame:
    """``kind,label,push_pull,nested_rank`` table."""
    frame = pd.concat([push_pull(net), nested_rank(net)], axis=1)
    return frame.reset_index()


def network_stats(
    net: BipartiteNetwork, restarts: Optional[int] = None, seed: Optional[int] = None
) -> NetworkStats:
    """Compute the five global statistics."""
    kept = _retained_nonempty(net)
    q = bipartite_modularity(kept, restarts=restarts, seed=seed).q
    return NetworkStats(
        web_asymmetry=web_asymmetry(kept),
        modularity=q,
        weighted_nestedness=weighted_nestedness(kept),
        interaction_asymmetry=interaction_asymmetry(kept),
        weighted_connectance=weighted_connectance(kept),
        n_features=kept.shape[0],
        n_activities=kept.shape[1],
        total_weight=kept.total,
    )
