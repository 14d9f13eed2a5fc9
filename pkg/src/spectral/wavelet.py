"""Continuous wavelet transform with a Morlet mother, red-noise significance
testing, ridge extraction and the time/scale averages built on them.

The transform runs in the frequency domain on the zero-padded, mean-removed
and (by default) variance-normalized series. Periods follow the Morlet
Fourier factor; the cone of influence uses the e-folding time √2·s.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.fft import fft, ifft
from scipy.stats import chi2

from ..config import get_settings
from ..errors import InputValidationError, NumericalError

log = logging.getLogger(__name__)

MIN_LENGTH = 8
MAX_LAG1 = 0.99


# === Series ===


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Daily series: start date, unit step, finite values."""
    start: date
    values: np.ndarray
    name: str = "series"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise InputValidationError(f"series '{self.name}' needs at least 2 values")
        if not np.all(np.isfinite(values)):
            raise InputValidationError(f"series '{self.name}' contains non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> date:
        return self.start + timedelta(days=len(self) - 1)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=len(self), freq="D")

    def between(self, start: date, end: date) -> "TimeSeries":
        i = (start - self.start).days
        j = (end - self.start).days + 1
        if i < 0 or j > len(self) or j <= i:
            raise InputValidationError(f"range {start}:{end} is outside series '{self.name}'")
        return TimeSeries(start, self.values[i:j], self.name)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": [d.date().isoformat() for d in self.dates], "value": self.values})

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, encoding="utf-8", lineterminator="\n", float_format="%.10g")
        return path

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, name: str = "series") -> "TimeSeries":
        """Build from a ``date,value`` frame with contiguous daily dates.

        Any single non-date column (e.g. ``stringency``) stands in for ``value``.
        """
        others = [c for c in frame.columns if c != "date"]
        column = "value" if "value" in others else (others[0] if len(others) == 1 else None)
        if "date" not in frame.columns or column is None:
            raise InputValidationError("series table needs a 'date' column and one 'value' column")
        try:
            days = pd.to_datetime(frame["date"], format="%Y-%m-%d")
            values = pd.to_numeric(frame[column])
        except (ValueError, TypeError) as e:
            raise InputValidationError(f"series table is malformed: {e}") from e
        order = np.argsort(days.to_numpy(), kind="stable")
        days, values = days.iloc[order], values.iloc[order]
        if (days.diff().dropna() != pd.Timedelta(days=1)).any():
            raise InputValidationError("series dates must be contiguous calendar days")
        return cls(days.iloc[0].date(), values.to_numpy(dtype=float), name)

    @classmethod
    def read_csv(cls, path: str | Path) -> "TimeSeries":
        path = Path(path)
        try:
            frame = pd.read_csv(path, encoding="utf-8")
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InputValidationError(f"cannot read {path}: {e}") from e
        return cls.from_frame(frame, path.stem)


# === Mother wavelet and parameters ===


@dataclass(frozen=True)
class Morlet:
    omega0: float = 6.0
    # empirical constants tabulated for omega0 = 6
    dofmin: float = 2.0
    cdelta: float = 0.776
    gamma: float = 2.32
    dj0: float = 0.60

    @property
    def fourier_factor(self) -> float:
        return 4.0 * np.pi / (self.omega0 + np.sqrt(2.0 + self.omega0**2))

    @property
    def coi_factor(self) -> float:
        return self.fourier_factor / np.sqrt(2.0)

    def daughter(self, k: np.ndarray, scale: float, dt: float) -> np.ndarray:
        """Fourier transform of the scaled wavelet at angular frequencies k."""
        expnt = -((scale * k - self.omega0) ** 2) / 2.0 * (k > 0)
        norm = np.sqrt(2.0 * np.pi * scale / dt) * np.pi ** (-0.25)
        return norm * np.exp(expnt) * (k > 0)


@dataclass(frozen=True)
class WaveletParams:
    omega0: float = 6.0
    s0: float = 2.0
    dj: float = 0.25
    j: Optional[int] = None
    dt: float = 1.0
    log1p: bool = False
    normalize: bool = True
    pad: bool = True

    def __post_init__(self):
        if self.omega0 <= 0 or self.s0 <= 0 or self.dj <= 0 or self.dt <= 0:
            raise InputValidationError("wavelet parameters must be positive")
        if self.j is not None and self.j < 0:
            raise InputValidationError("number of scales must be non-negative")

    @classmethod
    def from_settings(cls, **overrides) -> "WaveletParams":
        settings = get_settings()
        values = dict(omega0=settings.wavelet_omega0, s0=settings.wavelet_s0, dj=settings.wavelet_dj)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def mother(self) -> Morlet:
        return Morlet(self.omega0)

    def n_scales(self, n: int) -> int:
        """J + 1; by default the largest period is about half the record."""
        if self.j is not None:
            return self.j + 1
        ratio = n * self.dt / 2.0 / (self.mother.fourier_factor * self.s0)
        return max(int(np.log2(ratio) / self.dj), 0) + 1 if ratio > 1 else 1

    def scales(self, n: int) -> np.ndarray:
        return self.s0 * 2.0 ** (np.arange(self.n_scales(n)) * self.dj)


# === Spectrum ===


@dataclass
class WaveletSpectrum:
    """Coefficients on a (scale, time) grid plus everything derived from them."""
    start: date
    signal: np.ndarray
    scales: np.ndarray
    periods: np.ndarray
    coefficients: np.ndarray
    coi: np.ndarray
    params: WaveletParams
    variance: float
    name: str = "series"
    lag1: Optional[float] = None
    level: Optional[float] = None
    background: Optional[np.ndarray] = None
    significant: Optional[np.ndarray] = None

    @property
    def n_times(self) -> int:
        return self.coefficients.shape[1]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=self.n_times, freq="D")

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2

    @property
    def in_coi(self) -> np.ndarray:
        """True where the period lies inside the cone of influence."""
        return self.periods[:, None] <= self.coi[None, :]

    def mask(self) -> np.ndarray:
        if self.significant is None:
            significance(self)
        return self.significant

    def to_frame(self) -> pd.DataFrame:
        """Long format ``date,period,power,significant,in_coi``."""
        n_scales, n_times = self.coefficients.shape
        dates = [d.date().isoformat() for d in self.dates]
        return pd.DataFrame({
            "date": np.tile(dates, n_scales),
            "period": np.repeat(self.periods, n_times),
            "power": self.power.ravel(),
            "significant": self.mask().ravel(),
            "in_coi": self.in_coi.ravel(),
        })


def _prepare(values: np.ndarray, params: WaveletParams) -> Tuple[np.ndarray, float]:
    x = np.log1p(values) if params.log1p else values.astype(float)
    x = x - x.mean()
    std = x.std()
    if params.normalize:
        x = x / std if std > 0 else np.zeros_like(x)
    return x, float(x.var())


def cone_of_influence(n: int, dt: float, mother: Morlet) -> np.ndarray:
    distance = np.minimum(np.arange(n), np.arange(n)[::-1]).astype(float)
    distance[distance == 0] = 1e-5
    return mother.coi_factor * dt * distance


def transform(x: np.ndarray, scales: np.ndarray, params: WaveletParams) -> np.ndarray:
    """Raw frequency-domain CWT of an already prepared signal."""
    n1 = x.size
    if params.pad:
        base2 = int(np.log2(n1) + 0.4999)
        x = np.concatenate([x, np.zeros(2 ** (base2 + 1) - n1)])
    n = x.size
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=params.dt)
    f = fft(x)
    mother = params.mother
    wave = np.empty((scales.size, n), dtype=complex)
    for row, s in enumerate(scales):
        wave[row] = ifft(f * mother.daughter(k, s, params.dt))
    return wave[:, :n1]


def cwt(series: TimeSeries, params: Optional[WaveletParams] = None) -> WaveletSpectrum:
    """Morlet CWT of a daily series."""
    params = params or WaveletParams.from_settings()
    if len(series) < MIN_LENGTH:
        raise InputValidationError(f"series '{series.name}' is too short for a wavelet transform ({len(series)} < {MIN_LENGTH})")
    if params.log1p and np.any(series.values <= -1):
        raise InputValidationError("log1p needs values greater than -1")

    x, variance = _prepare(series.values, params)
    if not np.any(x):
        log.warning(f"[Wavelet] Series '{series.name}' has zero variance; power is zero everywhere")
    scales = params.scales(len(series))
    mother = params.mother
    spectrum = WaveletSpectrum(
        start=series.start,
        signal=x,
        scales=scales,
        periods=mother.fourier_factor * scales,
        coefficients=transform(x, scales, params),
        coi=cone_of_influence(len(series), params.dt, mother),
        params=params,
        variance=variance,
        name=series.name,
    )
    log.debug(
        f"[Wavelet] {series.name}: {scales.size} scales, periods {spectrum.periods[0]:.2f}-{spectrum.periods[-1]:.1f} days"
    )
    return spectrum


# === Significance ===


def lag1_autocorrelation(x: np.ndarray) -> float:
    """Red-noise coefficient (r1 + √r2)/2, r1 when r2 <= 0, clipped to [0, 0.99]."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    denom = float(x @ x)
    if denom <= 0 or x.size < 3:
        return 0.0
    r1 = float(x[:-1] @ x[1:]) / denom
    r2 = float(x[:-2] @ x[2:]) / denom
    alpha = (r1 + np.sqrt(r2)) / 2.0 if r2 > 0 else r1
    return float(np.clip(alpha, 0.0, MAX_LAG1))


def red_noise_spectrum(periods: np.ndarray, lag1: float, dt: float = 1.0) -> np.ndarray:
    """Normalized AR(1) background at each Fourier period."""
    freq = dt / periods
    return (1.0 - lag1**2) / (1.0 + lag1**2 - 2.0 * lag1 * np.cos(2.0 * np.pi * freq))


def significance(
    spectrum: WaveletSpectrum, level: Optional[float] = None, lag1: Optional[float] = None
) -> np.ndarray:
    """Pointwise chi-square test of power against the red-noise background.

    Sets ``lag1``, ``background`` and ``significant`` on the spectrum and
    returns the mask, which is false outside the cone of influence.
    """
    level = level or get_settings().significance_level
    if not 0.0 < level < 1.0:
        raise InputValidationError(f"significance level {level} is outside (0, 1)")
    alpha = lag1_autocorrelation(spectrum.signal) if lag1 is None else float(lag1)
    background = red_noise_spectrum(spectrum.periods, alpha, spectrum.params.dt)
    spectrum.lag1, spectrum.level, spectrum.background = alpha, level, background

    if spectrum.variance <= 0:
        log.warning(f"[Wavelet] Series '{spectrum.name}' has degenerate variance; nothing is significant")
        spectrum.significant = np.zeros(spectrum.coefficients.shape, dtype=bool)
        return spectrum.significant

    dof = spectrum.params.mother.dofmin
    threshold = background * chi2.ppf(level, dof) / dof
    ratio = spectrum.power / spectrum.variance
    spectrum.significant = (ratio > threshold[:, None]) & spectrum.in_coi
    return spectrum.significant


# === Ridges ===


@dataclass(eq=False)
class Ridge:
    points: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def last(self) -> Tuple[int, int]:
        return self.points[-1]


def ridges(spectrum: WaveletSpectrum, min_length: int = 2) -> List[Ridge]:
    """Chains of significant per-time local power maxima along the period axis.

    A maximum at time t extends the ridge ending at t-1 whose period index is
    nearest (at most one step away); otherwise it starts a new ridge.
    """
    mask = spectrum.mask()
    power = spectrum.power
    n_scales, n_times = power.shape
    if n_scales < 3:
        return []
    peak = np.zeros_like(mask)
    peak[1:-1] = (power[1:-1] > power[:-2]) & (power[1:-1] >= power[2:])
    peak &= mask

    finished: List[Ridge] = []
    active: List[Ridge] = []
    for t in range(n_times):
        rows = np.flatnonzero(peak[:, t])
        extended: List[Ridge] = []
        for j in rows:
            candidates = [r for r in active if r not in extended and abs(r.last[1] - j) <= 1]
            if candidates:
                ridge = min(candidates, key=lambda r: (abs(r.last[1] - j), r.last[1]))
                ridge.points.append((t, int(j)))
            else:
                ridge = Ridge([(t, int(j))])
            extended.append(ridge)
        finished.extend(r for r in active if r not in extended)
        active = extended
    finished.extend(active)

    kept = [r for r in finished if len(r.points) >= min_length]
    kept.sort(key=lambda r: r.points[0])
    return kept


def ridges_frame(spectrum: WaveletSpectrum, found: Optional[List[Ridge]] = None) -> pd.DataFrame:
    """``ridge,date,period,power`` rows."""
    found = ridges(spectrum) if found is None else found
    dates = spectrum.dates
    power = spectrum.power
    rows = [
        {
            "ridge": number,
            "date": dates[t].date().isoformat(),
            "period": float(spectrum.periods[j]),
            "power": float(power[j, t]),
        }
        for number, ridge in enumerate(found, start=1)
        for t, j in ridge.points
    ]
    return pd.DataFrame(rows, columns=["ridge", "date", "period", "power"])


# === Averages and reconstruction ===


def global_power(spectrum: WaveletSpectrum) -> pd.DataFrame:
    """Time-averaged power per period over points inside the cone of influence.

    The significance threshold uses the time-averaged degrees of freedom.
    """
    inside = spectrum.in_coi
    counts = inside.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_power = np.where(counts > 0, (spectrum.power * inside).sum(axis=1) / counts, np.nan)
    if spectrum.background is None:
        significance(spectrum)
    mother = spectrum.params.mother
    dof = mother.dofmin * np.sqrt(1.0 + (np.maximum(counts, 1) * spectrum.params.dt / mother.gamma / spectrum.scales) ** 2)
    dof = np.maximum(dof, mother.dofmin)
    threshold = spectrum.variance * spectrum.background * chi2.ppf(spectrum.level, dof) / dof
    return pd.DataFrame({
        "period": spectrum.periods,
        "power": mean_power,
        "threshold": threshold,
        "n_points": counts,
    })


def scale_averaged_power(
    spectrum: WaveletSpectrum, period_min: float, period_max: float
) -> Tuple[np.ndarray, float]:
    """Band-averaged power time series and its significance threshold."""
    band = (spectrum.periods >= period_min) & (spectrum.periods <= period_max)
    if not band.any():
        raise InputValidationError(f"no wavelet periods between {period_min} and {period_max}")
    if spectrum.background is None:
        significance(spectrum)
    params, mother = spectrum.params, spectrum.params.mother
    scales = spectrum.scales[band]
    averaged = params.dj * params.dt / mother.cdelta * (spectrum.power[band] / scales[:, None]).sum(axis=0)

    s_avg = 1.0 / np.sum(1.0 / scales)
    s_mid = np.exp((np.log(scales[0]) + np.log(scales[-1])) / 2.0)
    n_avg = scales.size
    dof = mother.dofmin * n_avg * s_avg / s_mid * np.sqrt(1.0 + (n_avg * params.dj / mother.dj0) ** 2)
    background = s_avg * np.sum(spectrum.background[band] / scales)
    threshold = params.dj * params.dt / mother.cdelta / s_avg * spectrum.variance * background * chi2.ppf(spectrum.level, dof) / dof
    return averaged, float(threshold)


def reconstructed_variance(spectrum: WaveletSpectrum) -> float:
    """Series variance recovered from scale-integrated power (Morlet C_delta)."""
    params, mother = spectrum.params, spectrum.params.mother
    if mother.omega0 != 6.0:
        raise NumericalError("the reconstruction factor is only tabulated for omega0 = 6")
    per_time = (spectrum.power / spectrum.scales[:, None]).sum(axis=0)
    return float(params.dj * params.dt / mother.cdelta * per_time.mean())


def peak_period(spectrum: WaveletSpectrum) -> float:
    """Period of the largest time-averaged power (all points)."""
    return float(spectrum.periods[np.argmax(spectrum.power.mean(axis=1))])


def summarize(spectrum: WaveletSpectrum) -> dict:
    """Compact summary used in pipeline reports."""
    mask = spectrum.mask()
    inside = spectrum.in_coi
    found = ridges(spectrum)
    glob = global_power(spectrum)
    significant_periods = glob.loc[glob["power"] > glob["threshold"], "period"]
    return {
        "name": spectrum.name,
        "n_days": spectrum.n_times,
        "lag1": spectrum.lag1,
        "peak_period": peak_period(spectrum) if spectrum.variance > 0 else None,
        "significant_fraction": float(mask.sum() / inside.sum()) if inside.any() else 0.0,
        "significant_global_periods": [round(float(p), 4) for p in significant_periods],
        "ridge_periods": [
            round(float(np.median(spectrum.periods[[j for _, j in r.points]])), 4) for r in found
        ],
    }
