"""Wavelet, cross-wavelet and coherence analysis of daily series."""
from .wavelet import (
    Morlet,
    Ridge,
    TimeSeries,
    WaveletParams,
    WaveletSpectrum,
    cwt,
    global_power,
    lag1_autocorrelation,
    reconstructed_variance,
    ridges,
    ridges_frame,
    scale_averaged_power,
    significance,
    summarize,
)
from .cross import CrossSpectrum, coherence, coherence_significance, xwt

__all__ = [
    "CrossSpectrum",
    "Morlet",
    "Ridge",
    "TimeSeries",
    "WaveletParams",
    "WaveletSpectrum",
    "coherence",
    "coherence_significance",
    "cwt",
    "global_power",
    "lag1_autocorrelation",
    "reconstructed_variance",
    "ridges",
    "ridges_frame",
    "scale_averaged_power",
    "significance",
    "summarize",
    "xwt",
]
