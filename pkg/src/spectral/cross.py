"""Cross-wavelet transform, wavelet coherence and their significance.

Phase is arg(W_x · conj(W_y)); a positive phase means x leads y.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from typing import Optional

import numpy as np
import pandas as pd
from scipy.ndimage import gaussian_filter1d, uniform_filter1d
from scipy.optimize import brentq
from scipy.signal import lfilter
from scipy.special import k1

from ..config import get_settings
from ..errors import InputValidationError
from .wavelet import (
    TimeSeries,
    WaveletParams,
    WaveletSpectrum,
    cwt,
    lag1_autocorrelation,
    red_noise_spectrum,
)

log = logging.getLogger(__name__)


@dataclass
class CrossSpectrum:
    start: date
    periods: np.ndarray
    scales: np.ndarray
    cross: np.ndarray
    coi: np.ndarray
    params: WaveletParams
    names: tuple = ("x", "y")
    coherence: Optional[np.ndarray] = None
    smoothed_cross: Optional[np.ndarray] = None
    significant: Optional[np.ndarray] = None
    coherence_significant: Optional[np.ndarray] = None

    @property
    def n_times(self) -> int:
        return self.cross.shape[1]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=self.n_times, freq="D")

    @property
    def power(self) -> np.ndarray:
        """Cross-wavelet power |W_xy|."""
        return np.abs(self.cross)

    @property
    def phase(self) -> np.ndarray:
        """Phase in (-pi, pi]; NaN where cross power is zero.

        Uses the smoothed cross spectrum once coherence has been computed.
        """
        source = self.cross if self.smoothed_cross is None else self.smoothed_cross
        angle = np.angle(source)
        angle = np.where(angle == -np.pi, np.pi, angle)
        return np.where(np.abs(source) > 0, angle, np.nan)

    @property
    def in_coi(self) -> np.ndarray:
        return self.periods[:, None] <= self.coi[None, :]

    def to_frame(self) -> pd.DataFrame:
        """Long format ``date,period,power,phase[,coherence],significant,in_coi``."""
        n_scales, n_times = self.cross.shape
        dates = [d.date().isoformat() for d in self.dates]
        frame = pd.DataFrame({
            "date": np.tile(dates, n_scales),
            "period": np.repeat(self.periods, n_times),
            "power": self.power.ravel(),
            "phase": self.phase.ravel(),
        })
        significant = self.significant
        if self.coherence is not None:
            frame["coherence"] = self.coherence.ravel()
            if self.coherence_significant is not None:
                significant = self.coherence_significant
        frame["significant"] = (
            significant.ravel() if significant is not None else np.zeros(frame.shape[0], dtype=bool)
        )
        frame["in_coi"] = self.in_coi.ravel()
        return frame


def _check_pair(x: TimeSeries, y: TimeSeries) -> None:
    if len(x) != len(y):
        raise InputValidationError(f"series lengths differ: {len(x)} vs {len(y)}")
    if x.start != y.start:
        raise InputValidationError(f"series are not aligned: {x.start} vs {y.start}")


def product_significance_factor(level: float) -> float:
    """Z with 1 - Z·K1(Z) = level (two degrees of freedom per spectrum)."""
    return float(brentq(lambda z: 1.0 - z * k1(z) - level, 1e-6, 50.0))


def _cross_from(wx: WaveletSpectrum, wy: WaveletSpectrum, names) -> CrossSpectrum:
    return CrossSpectrum(
        start=wx.start,
        periods=wx.periods,
        scales=wx.scales,
        cross=wx.coefficients * np.conj(wy.coefficients),
        coi=wx.coi,
        params=wx.params,
        names=names,
    )


def xwt(
    x: TimeSeries,
    y: TimeSeries,
    params: Optional[WaveletParams] = None,
    level: Optional[float] = None,
) -> CrossSpectrum:
    """Cross-wavelet spectrum with significance against the product of the
    two red-noise backgrounds."""
    return _xwt(x, y, params, level)[0]


def _xwt(x, y, params, level):
    _check_pair(x, y)
    params = params or WaveletParams.from_settings()
    level = level or get_settings().significance_level
    wx, wy = cwt(x, params), cwt(y, params)
    spectrum = _cross_from(wx, wy, (x.name, y.name))

    px = red_noise_spectrum(wx.periods, lag1_autocorrelation(wx.signal), params.dt)
    py = red_noise_spectrum(wy.periods, lag1_autocorrelation(wy.signal), params.dt)
    scale = np.sqrt(wx.variance * wy.variance)
    if scale <= 0:
        log.warning("[XWT] A series has zero variance; nothing is significant")
        spectrum.significant = np.zeros(spectrum.cross.shape, dtype=bool)
    else:
        z = product_significance_factor(level)
        threshold = scale * z / 2.0 * np.sqrt(px * py)
        spectrum.significant = (spectrum.power >= threshold[:, None]) & spectrum.in_coi
    log.info(f"[XWT] {x.name} x {y.name}: {int(spectrum.significant.sum())} significant points")
    return spectrum, wx, wy


def smooth(field: np.ndarray, scales: np.ndarray, params: WaveletParams) -> np.ndarray:
    """Gaussian smoothing in time (width matched to scale), boxcar in scale."""
    out = np.empty_like(field)
    for row, s in enumerate(scales):
        sigma = s / params.dt
        if np.iscomplexobj(field):
            out[row] = gaussian_filter1d(field[row].real, sigma, mode="nearest") + 1j * gaussian_filter1d(
                field[row].imag, sigma, mode="nearest"
            )
        else:
            out[row] = gaussian_filter1d(field[row], sigma, mode="nearest")
    width = int(round(0.6 / params.dj))
    if width % 2 == 0:
        width += 1
    if np.iscomplexobj(out):
        return uniform_filter1d(out.real, width, axis=0, mode="nearest") + 1j * uniform_filter1d(
            out.imag, width, axis=0, mode="nearest"
        )
    return uniform_filter1d(out, width, axis=0, mode="nearest")


def _coherence_fields(wx: np.ndarray, wy: np.ndarray, scales: np.ndarray, params: WaveletParams):
    inv = 1.0 / scales[:, None]
    s_xy = smooth(wx * np.conj(wy) * inv, scales, params)
    s_x = smooth(np.abs(wx) ** 2 * inv, scales, params)
    s_y = smooth(np.abs(wy) ** 2 * inv, scales, params)
    denom = s_x * s_y
    with np.errstate(divide="ignore", invalid="ignore"):
        coherence = np.where(denom > 0, np.abs(s_xy) ** 2 / denom, 0.0)
    return np.clip(coherence, 0.0, 1.0), s_xy


def coherence(
    x: TimeSeries,
    y: TimeSeries,
    params: Optional[WaveletParams] = None,
    level: Optional[float] = None,
    draws: Optional[int] = None,
    seed: Optional[int] = None,
) -> CrossSpectrum:
    """Wavelet coherence of two aligned series.

    ``draws`` > 0 adds a Monte Carlo significance mask against AR(1)
    surrogates; ``draws=0`` skips it.
    """
    spectrum, wx, wy = _xwt(x, y, params, level)
    params = spectrum.params
    spectrum.coherence, spectrum.smoothed_cross = _coherence_fields(
        wx.coefficients, wy.coefficients, spectrum.scales, params
    )
    draws = get_settings().coherence_mc_draws if draws is None else draws
    if draws > 0:
        threshold = coherence_significance(
            len(x), lag1_autocorrelation(wx.signal), lag1_autocorrelation(wy.signal),
            params, level=level, draws=draws, seed=seed,
        )
        spectrum.coherence_significant = (spectrum.coherence >= threshold[:, None]) & spectrum.in_coi
    return spectrum


def _ar1(n: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(n + 100)
    return lfilter([1.0], [1.0, -alpha], noise)[100:]


def coherence_significance(
    n: int,
    lag1_x: float,
    lag1_y: float,
    params: WaveletParams,
    level: Optional[float] = None,
    draws: Optional[int] = None,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Per-scale coherence quantile of independent AR(1) surrogate pairs.

    Only points inside the cone of influence enter the quantile.
    """
    settings = get_settings()
    level = level or settings.significance_level
    draws = draws or settings.coherence_mc_draws
    seed = settings.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    start = date(2000, 1, 1)

    pooled = None
    inside = None
    for _ in range(draws):
        sx = cwt(TimeSeries(start, _ar1(n, lag1_x, rng), "surrogate_x"), params)
        sy = cwt(TimeSeries(start, _ar1(n, lag1_y, rng), "surrogate_y"), params)
        field, _ = _coherence_fields(sx.coefficients, sy.coefficients, sx.scales, params)
        if pooled is None:
            pooled = [[] for _ in range(field.shape[0])]
            inside = sx.in_coi
        for row in range(field.shape[0]):
            values = field[row, inside[row]]
            pooled[row].append(values if values.size else field[row])
    threshold = np.array([np.quantile(np.concatenate(rows), level) for rows in pooled])
    log.debug(f"[Coherence] Monte Carlo thresholds from {draws} surrogate pairs")
    return threshold
