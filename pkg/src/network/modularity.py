"""Weighted bipartite modularity.

Q is maximized by alternating label propagation between the two node kinds,
followed by agglomerative merging of module pairs, repeated until neither
step improves Q. Restarts are independently seeded; the best Q wins, ties
going to the lowest restart index.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from ..config import get_settings
from ..errors import NumericalError
from .bipartite import BipartiteNetwork

log = logging.getLogger(__name__)

TOLERANCE = 1e-12


@dataclass(frozen=True)
class ModularityResult:
    q: float
    feature_modules: np.ndarray
    activity_modules: np.ndarray
    features: List[str]
    activities: List[str]
    restart: int = 0

    @property
    def n_modules(self) -> int:
        return len(set(self.feature_modules.tolist()) | set(self.activity_modules.tolist()))

    def partition(self) -> Dict[str, Dict[str, int]]:
        return {
            "feature": {f: int(g) for f, g in zip(self.features, self.feature_modules)},
            "activity": {a: int(h) for a, h in zip(self.activities, self.activity_modules)},
        }


def modularity_matrix(weights: np.ndarray) -> np.ndarray:
    """B[f, a] = W[f, a]/m - W_f+ W_+a / m^2."""
    w = np.asarray(weights, dtype=float)
    m = w.sum()
    if m <= 0:
        raise NumericalError("modularity is undefined for zero total weight")
    return w / m - np.outer(w.sum(axis=1), w.sum(axis=0)) / m**2


def modularity_q(net: BipartiteNetwork, feature_modules, activity_modules) -> float:
    """Q of a given partition (module ids compared across kinds)."""
    b = modularity_matrix(net.weights)
    same = np.asarray(feature_modules)[:, None] == np.asarray(activity_modules)[None, :]
    return float(b[same].sum())


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _argmax_random(scores: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    best = scores.max(axis=1, keepdims=True)
    candidates = scores >= best - TOLERANCE
    return np.argmax(candidates * rng.random(scores.shape), axis=1)


def _q(b: np.ndarray, g: np.ndarray, h: np.ndarray) -> float:
    return float(b[g[:, None] == h[None, :]].sum())


def _propagate(b: np.ndarray, g: np.ndarray, rng: np.random.Generator):
    """Alternate best responses of activities to features and back."""
    k = int(g.max()) + 1
    h = _argmax_random(b.T @ _one_hot(g, k), rng)
    q = _q(b, g, h)
    while True:
        k = int(max(g.max(), h.max())) + 1
        new_g = _argmax_random(b @ _one_hot(h, k), rng)
        k = int(max(new_g.max(), h.max())) + 1
        new_h = _argmax_random(b.T @ _one_hot(new_g, k), rng)
        new_q = _q(b, new_g, new_h)
        if new_q <= q + TOLERANCE:
            return g, h, q
        g, h, q = new_g, new_h, new_q


def _compact(g: np.ndarray, h: np.ndarray):
    _, inverse = np.unique(np.concatenate([g, h]), return_inverse=True)
    return inverse[: g.size], inverse[g.size:]


def _agglomerate(b: np.ndarray, g: np.ndarray, h: np.ndarray):
    """Merge module pairs while a merge does not decrease Q."""
    g, h = _compact(g, h)
    while True:
        k = int(max(g.max(), h.max())) + 1
        if k < 2:
            return g, h
        between = _one_hot(g, k).T @ b @ _one_hot(h, k)
        gain = between + between.T
        np.fill_diagonal(gain, -np.inf)
        p, r = np.unravel_index(np.argmax(gain), gain.shape)
        if gain[p, r] < -TOLERANCE:
            return g, h
        keep, drop = min(p, r), max(p, r)
        g = np.where(g == drop, keep, g)
        h = np.where(h == drop, keep, h)
        g, h = _compact(g, h)


def _canonical(g: np.ndarray, h: np.ndarray):
    """Relabel modules by first appearance, features before activities."""
    order: Dict[int, int] = {}
    for label in np.concatenate([g, h]).tolist():
        order.setdefault(label, len(order))
    return (
        np.array([order[x] for x in g.tolist()], dtype=int),
        np.array([order[x] for x in h.tolist()], dtype=int),
    )


def _restart(b: np.ndarray, seed: int, restart: int):
    rng = np.random.default_rng([seed, restart])
    n_f, n_a = b.shape
    if restart == 0:
        g = np.arange(n_f)
    else:
        g = rng.integers(0, max(1, min(n_f, n_a)), size=n_f)
    g, h, q = _propagate(b, g, rng)
    while True:
        g, h = _agglomerate(b, g, h)
        g, h, new_q = _propagate(b, g, rng)
        if new_q <= q + TOLERANCE:
            q = max(q, new_q)
            break
        q = new_q
    q = _q(b, g, h)
    log.debug(f"[Modularity] restart {restart}: Q={q:.6f}")
    return q, g, h


def bipartite_modularity(
    net: BipartiteNetwork,
    restarts: Optional[int] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ModularityResult:
    """Best partition over seeded restarts (deterministic reduction)."""
    settings = get_settings()
    restarts = restarts or settings.modularity_restarts
    seed = settings.seed if seed is None else seed
    workers = workers or settings.workers
    kept = net.retained()
    b = modularity_matrix(kept.weights)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _restart(b, seed, r), range(restarts)))
    else:
        results = [_restart(b, seed, r) for r in range(restarts)]

    best = 0
    for r, (q, _, _) in enumerate(results):
        if q > results[best][0] + TOLERANCE:
            best = r
    q, g, h = results[best]
    g, h = _canonical(g, h)
    result = ModularityResult(q, g, h, list(kept.features), list(kept.activities), best)
    log.info(f"[Modularity] Q={q:.4f} with {result.n_modules} modules (best of {restarts} restarts)")
    return result
