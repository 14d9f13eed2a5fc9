"""CES tensor and higher-order SVD.

Unfoldings use the cyclic column order: mode 1 lays out (activity, day),
mode 2 (day, feature) and mode 3 (feature, activity), the last index varying
fastest.

>>> import numpy as np
>>> f, a, d = np.meshgrid(range(2), range(2), range(2), indexing="ij")
>>> x = 1 + f + 2 * a + 4 * d
>>> unfold(x, 1).tolist()
[[1, 5, 3, 7], [2, 6, 4, 8]]
>>> bool(np.array_equal(refold(unfold(x, 3), 3, x.shape), x))
True
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg

from ..config import get_settings
from ..data.models import DailyCounts
from ..errors import InputValidationError, NumericalError

log = logging.getLogger(__name__)

MODE_NAMES = {1: "feature", 2: "activity", 3: "time"}
_CYCLIC = {1: (0, 1, 2), 2: (1, 2, 0), 3: (2, 0, 1)}

Mode = Union[int, str]


def _mode(mode: Mode) -> int:
    if isinstance(mode, str):
        for number, name in MODE_NAMES.items():
            if name == mode or (mode == "day" and name == "time"):
                return number
        raise InputValidationError(f"unknown tensor mode '{mode}'")
    if mode not in _CYCLIC:
        raise InputValidationError(f"tensor mode must be 1, 2 or 3, got {mode}")
    return mode


def unfold(x: np.ndarray, mode: Mode) -> np.ndarray:
    """Mode-n unfolding (rows indexed by mode n)."""
    order = _CYCLIC[_mode(mode)]
    moved = np.transpose(x, order)
    return moved.reshape(moved.shape[0], -1)


def refold(matrix: np.ndarray, mode: Mode, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given shape."""
    order = _CYCLIC[_mode(mode)]
    moved = np.asarray(matrix).reshape([shape[i] for i in order])
    return np.transpose(moved, np.argsort(order))


@dataclass
class CESTensor:
    """Features x activities x days array with its axis labels."""
    values: np.ndarray
    features: List[str]
    activities: List[str]
    days: pd.DatetimeIndex

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (len(self.features), len(self.activities), len(self.days))
        if self.values.shape != expected:
            raise InputValidationError(f"tensor shape {self.values.shape} does not match labels {expected}")

    @classmethod
    def from_counts(cls, counts: DailyCounts) -> "CESTensor":
        return cls(counts.counts.astype(float), list(counts.features), list(counts.activities), counts.days)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape

    def labels(self, mode: Mode) -> List[str]:
        number = _mode(mode)
        if number == 1:
            return list(self.features)
        if number == 2:
            return list(self.activities)
        return [d.date().isoformat() for d in self.days]

    def centered(self) -> "CESTensor":
        """Subtract each cell's temporal mean."""
        return CESTensor(self.values - self.values.mean(axis=2, keepdims=True), self.features, self.activities, self.days)

    def normalized(self) -> "CESTensor":
        """Divide each day slice by its total; silent days stay zero."""
        totals = self.values.sum(axis=(0, 1), keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(totals > 0, self.values / totals, 0.0)
        return CESTensor(values, self.features, self.activities, self.days)


@dataclass
class HosvdResult:
    core: np.ndarray
    factors: List[np.ndarray]
    singular_values: List[np.ndarray]
    labels: List[List[str]] = field(default_factory=lambda: [[], [], []])
    degenerate: bool = False

    def factor(self, mode: Mode) -> np.ndarray:
        return self.factors[_mode(mode) - 1]

    def reconstruct(self) -> np.ndarray:
        return multilinear_product(self.core, self.factors)

    def factor_frame(self, mode: Mode) -> pd.DataFrame:
        number = _mode(mode)
        u = self.factors[number - 1]
        index = pd.Index(self.labels[number - 1] or range(u.shape[0]), name=MODE_NAMES[number])
        return pd.DataFrame(u, index=index, columns=[f"u{k + 1}" for k in range(u.shape[1])])

    def scree_frame(self) -> pd.DataFrame:
        """``mode,index,singular_value,energy_fraction`` per mode."""
        rows = []
        for number, values in enumerate(self.singular_values, start=1):
            energy = float((values**2).sum())
            for k, value in enumerate(values, start=1):
                rows.append({
                    "mode": MODE_NAMES[number],
                    "index": k,
                    "singular_value": float(value),
                    "energy_fraction": float(value**2 / energy) if energy > 0 else 0.0,
                })
        return pd.DataFrame(rows, columns=["mode", "index", "singular_value", "energy_fraction"])


def multilinear_product(x: np.ndarray, matrices: Sequence[np.ndarray], transpose: bool = False) -> np.ndarray:
    """x x1 M1 x2 M2 x3 M3 (or with the transposes).

    Each tensordot contracts the leading axis and appends the new one, so
    three contractions return the axes to their original order.
    """
    out = x
    for m in matrices:
        out = np.tensordot(out, m if transpose else m.T, axes=(0, 0))
    return out


def _orient(u: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if u.size == 0:
        return u
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def _complete_basis(u: np.ndarray, n: int) -> np.ndarray:
    """Extend orthonormal columns ``u`` (n x r) to an n x n orthonormal basis."""
    r = u.shape[1]
    if r == n:
        return u
    if r == 0:
        return np.eye(n)
    q, _ = scipy.linalg.qr(u, mode="full")
    basis = q.copy()
    basis[:, :r] = u
    return basis


def left_singular(matrix: np.ndarray, gram_ratio: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Full left singular basis (rows x rows) and singular values.

    Tall matrices go through the eigendecomposition of the small Gram matrix
    MᵀM; U = MV/σ for the non-zero σ, the rest of the basis is completed by QR.
    """
    gram_ratio = gram_ratio or get_settings().gram_ratio
    rows, cols = matrix.shape
    try:
        if cols > 0 and rows >= gram_ratio * cols:
            eigvals, v = np.linalg.eigh(matrix.T @ matrix)
            order = np.argsort(eigvals)[::-1]
            sigma = np.sqrt(np.clip(eigvals[order], 0.0, None))
            v = v[:, order]
            tol = max(rows, cols) * np.finfo(float).eps * (sigma[0] if sigma.size else 0.0)
            keep = sigma > tol
            u = (matrix @ v[:, keep]) / sigma[keep]
            # re-orthonormalize against round-off
            if u.shape[1]:
                u, _ = np.linalg.qr(u)
            return _complete_basis(u, rows), sigma[: min(rows, cols)]
        u, sigma, _ = np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD did not converge: {e}") from e
    return _complete_basis(u, rows), sigma


def hosvd(
    x: Union[np.ndarray, CESTensor],
    truncation: Optional[Sequence[Optional[int]]] = None,
    gram_ratio: Optional[float] = None,
) -> HosvdResult:
    """Higher-order SVD; ``truncation`` keeps leading ranks per mode."""
    labels = [[], [], []]
    if isinstance(x, CESTensor):
        labels = [x.labels(m) for m in (1, 2, 3)]
        x = x.values
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise InputValidationError(f"HOSVD expects a 3-way array, got {x.ndim} axes")
    if not np.all(np.isfinite(x)):
        raise InputValidationError("tensor contains non-finite entries")

    ranks = list(truncation) if truncation is not None else [None, None, None]
    if len(ranks) != 3:
        raise InputValidationError("truncation needs one rank per mode")
    ranks = [x.shape[n] if r is None else int(r) for n, r in enumerate(ranks)]
    if any(r < 1 or r > x.shape[n] for n, r in enumerate(ranks)):
        raise InputValidationError(f"truncation ranks {ranks} out of range for shape {x.shape}")

    if not np.any(x):
        log.warning("[HOSVD] Zero tensor: identity factors, zero core")
        factors = [np.eye(n)[:, :r] for n, r in zip(x.shape, ranks)]
        return HosvdResult(
            core=np.zeros(ranks),
            factors=factors,
            singular_values=[np.zeros(r) for r in ranks],
            labels=labels,
            degenerate=True,
        )

    factors = []
    for mode in (1, 2, 3):
        u, _ = left_singular(unfold(x, mode), gram_ratio)
        factors.append(_orient(u)[:, : ranks[mode - 1]])

    core = multilinear_product(x, factors, transpose=True)
    singular_values = [
        np.sqrt((unfold(core, mode) ** 2).sum(axis=1)) for mode in (1, 2, 3)
    ]
    log.info(
        f"[HOSVD] Decomposed {x.shape[0]}x{x.shape[1]}x{x.shape[2]} tensor; leading singular values "
        + ", ".join(f"{s[0]:.4g}" for s in singular_values)
    )
    return HosvdResult(core, factors, singular_values, labels)


def leading_outer_product(result: HosvdResult, mode_a: Mode, mode_b: Mode) -> pd.DataFrame:
    """u_a(1) ⊗ u_b(1) labeled by the two modes' axes."""
    a, b = _mode(mode_a), _mode(mode_b)
    if a == b:
        raise InputValidationError("outer product needs two different modes")
    ua, ub = result.factors[a - 1][:, 0], result.factors[b - 1][:, 0]
    index = result.labels[a - 1] or list(range(ua.size))
    columns = result.labels[b - 1] or list(range(ub.size))
    frame = pd.DataFrame(np.outer(ua, ub), index=pd.Index(index, name=MODE_NAMES[a]), columns=columns)
    return frame


def max_cell(frame: pd.DataFrame) -> Tuple[str, str]:
    """Labels of the largest-magnitude cell of an outer-product matrix."""
    values = np.abs(frame.to_numpy())
    i, j = np.unravel_index(np.argmax(values), values.shape)
    return frame.index[i], frame.columns[j]


def write_hosvd(result: HosvdResult, out_dir: str | Path, prefix: str = "hosvd") -> List[Path]:
    """Factor matrices, scree and the three leading outer products as CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for mode in (1, 2, 3):
        path = out_dir / f"{prefix}_factor_{MODE_NAMES[mode]}.csv"
        result.factor_frame(mode).to_csv(path, encoding="utf-8", lineterminator="\n", float_format="%.10g")
        written.append(path)
    path = out_dir / f"{prefix}_scree.csv"
    result.scree_frame().to_csv(path, index=False, encoding="utf-8", lineterminator="\n", float_format="%.10g")
    written.append(path)
    for a, b in ((1, 2), (1, 3), (2, 3)):
        path = out_dir / f"{prefix}_outer_{MODE_NAMES[a]}_{MODE_NAMES[b]}.csv"
        leading_outer_product(result, a, b).to_csv(path, encoding="utf-8", lineterminator="\n", float_format="%.10g")
        written.append(path)
    return written
