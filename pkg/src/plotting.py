"""SVG figures: outer-product heatmaps and wavelet spectrograms.

SVG metadata and the hash salt are fixed so reruns produce identical files.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .spectral.cross import CrossSpectrum  # noqa: E402
from .spectral.wavelet import Ridge, WaveletSpectrum, ridges  # noqa: E402

log = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "ces-network"
plt.rcParams["svg.fonttype"] = "none"

ARROW_STEP = 12


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    log.debug(f"[Plot] Wrote {path.name}")
    return path


def plot_outer_product(frame: pd.DataFrame, path: str | Path, title: Optional[str] = None) -> Path:
    """Diverging heatmap of a labeled outer-product matrix."""
    values = frame.to_numpy(dtype=float)
    limit = float(np.abs(values).max()) or 1.0
    width = min(2 + 0.3 * values.shape[1], 40)
    height = min(2 + 0.3 * values.shape[0], 40)
    fig, ax = plt.subplots(figsize=(width, height))
    image = ax.imshow(values, cmap="RdBu_r", vmin=-limit, vmax=limit, aspect="auto")
    ax.set_yticks(range(values.shape[0]))
    ax.set_yticklabels([str(v) for v in frame.index], fontsize=7)
    if values.shape[1] <= 60:
        ax.set_xticks(range(values.shape[1]))
        ax.set_xticklabels([str(v) for v in frame.columns], rotation=90, fontsize=7)
    ax.set_ylabel(frame.index.name or "")
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, shrink=0.8)
    return _save(fig, path)


def plot_spectrum(
    spectrum: Union[WaveletSpectrum, CrossSpectrum],
    path: str | Path,
    title: Optional[str] = None,
    found: Optional[List[Ridge]] = None,
) -> Path:
    """Power (or coherence) with significance contours, ridges, COI and phase arrows."""
    t = np.arange(spectrum.n_times)
    log_period = np.log2(spectrum.periods)
    cross = isinstance(spectrum, CrossSpectrum)
    if cross and spectrum.coherence is not None:
        field, label = spectrum.coherence, "coherence"
        mask = spectrum.coherence_significant if spectrum.coherence_significant is not None else spectrum.significant
    elif cross:
        field, label = np.log2(spectrum.power + 1e-12), "log2 cross power"
        mask = spectrum.significant
    else:
        field, label = np.log2(spectrum.power + 1e-12), "log2 power"
        mask = spectrum.mask()

    fig, ax = plt.subplots(figsize=(10, 4))
    image = ax.contourf(t, log_period, field, levels=24, cmap="viridis")
    if mask is not None and mask.any():
        ax.contour(t, log_period, mask.astype(float), levels=[0.5], colors="white", linewidths=0.8)

    if not cross:
        for ridge in ridges(spectrum) if found is None else found:
            points = np.array(ridge.points)
            ax.plot(points[:, 0], log_period[points[:, 1]], color="black", linewidth=0.9)
    else:
        phase = spectrum.phase
        rows = np.arange(0, phase.shape[0], 2)
        cols = np.arange(0, phase.shape[1], max(spectrum.n_times // ARROW_STEP // 4, 1))
        sub = phase[np.ix_(rows, cols)]
        keep = spectrum.significant[np.ix_(rows, cols)] if spectrum.significant is not None else np.ones_like(sub, dtype=bool)
        tt, pp = np.meshgrid(cols, log_period[rows])
        u, v = np.cos(sub), np.sin(sub)
        ax.quiver(tt[keep], pp[keep], u[keep], v[keep], scale=40, width=0.002, color="black")

    coi = np.log2(np.clip(spectrum.coi, spectrum.periods[0], None))
    ax.fill_between(t, coi, log_period[-1], color="white", alpha=0.35, hatch="x", linewidth=0)
    ax.set_ylim(log_period[-1], log_period[0])
    ticks = np.arange(np.ceil(log_period[0]), np.floor(log_period[-1]) + 1)
    ax.set_yticks(ticks)
    ax.set_yticklabels([f"{2 ** k:g}" for k in ticks])
    ax.set_ylabel("period (days)")
    dates = spectrum.dates
    positions = np.linspace(0, spectrum.n_times - 1, 6).astype(int)
    ax.set_xticks(positions)
    ax.set_xticklabels([dates[p].date().isoformat() for p in positions], fontsize=7)
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, label=label)
    return _save(fig, path)
