"""
Ensemble-averaged power spectra and a finite-frequency peak detector.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.signal import find_peaks, periodogram, welch

from momentfield.exceptions import ConfigurationError
from momentfield.stochastic.ensemble import EnsembleStats

logger = logging.getLogger(__name__)

WELCH_SEGMENTS = 8
MIN_SEGMENT_LENGTH = 8
PEAK_PROMINENCE_DB = 6.0


@dataclass
class PowerSpectrum:
    """
    Averaged power spectral density per population.

    Attributes:
        frequencies: Frequencies without the DC bin
        power: Density per frequency and population, shape (F, M)
        segments: Welch segments per path (1 for the periodogram fallback)
        fallback: True when too few samples forced a single periodogram
        paths: Number of averaged paths
    """

    frequencies: np.ndarray
    power: np.ndarray
    segments: int
    fallback: bool
    paths: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frequencies": self.frequencies.tolist(),
            "power": self.power.tolist(),
            "segments": self.segments,
            "fallback": self.fallback,
            "paths": self.paths,
        }


@dataclass
class SpectralPeak:
    frequency: float
    power: float
    prominence_db: float
    population: int


def _as_paths(source: Union[EnsembleStats, np.ndarray], dt: Optional[float]) -> Tuple[np.ndarray, float]:
    if isinstance(source, EnsembleStats):
        times = source.times
        steps = np.diff(times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ConfigurationError("Spectra need a uniform sampling grid")
        return source.samples, float(steps[0])
    data = np.asarray(source, dtype=float)
    if dt is None:
        raise ConfigurationError("dt is required for raw sample arrays")
    if data.ndim == 1:
        data = data[None, :, None]
    elif data.ndim == 2:
        data = data[None]
    return data, float(dt)


def power_spectrum(
    source: Union[EnsembleStats, np.ndarray],
    dt: Optional[float] = None,
    segments: int = WELCH_SEGMENTS,
    band: Optional[Tuple[float, float]] = None,
) -> PowerSpectrum:
    """
    Welch spectrum per path (Hann window, 50% overlap), averaged over paths.

    Args:
        source: EnsembleStats, or samples shaped (G,), (G, M) or (P, G, M)
        dt: Sampling step for raw arrays
        segments: Target number of Welch segments per path
        band: Optional (low, high) frequency window of the result

    Returns:
        PowerSpectrum with the DC bin removed
    """
    data, dt = _as_paths(source, dt)
    G = data.shape[1]
    nperseg = (2 * G) // (segments + 1)
    noverlap = nperseg // 2
    count = 1 + (G - nperseg) // max(1, nperseg - noverlap) if nperseg >= MIN_SEGMENT_LENGTH else 0
    if count < 2:
        logger.warning(f"Only {G} samples per path; using a single Hann periodogram")
        freqs, pxx = periodogram(data, fs=1.0 / dt, window="hann", detrend="constant", axis=1)
        count, fallback = 1, True
    else:
        freqs, pxx = welch(
            data, fs=1.0 / dt, window="hann", nperseg=nperseg, noverlap=noverlap, detrend="constant", axis=1
        )
        fallback = False
    power = pxx.mean(axis=0)[1:]
    freqs = freqs[1:]
    if band is not None:
        keep = (freqs >= band[0]) & (freqs <= band[1])
        freqs, power = freqs[keep], power[keep]
    return PowerSpectrum(freqs, power, count, fallback, data.shape[0])


def spectral_peak(
    spectrum: PowerSpectrum,
    population: int = 0,
    min_prominence_db: float = PEAK_PROMINENCE_DB,
    floor_halfwidth: Optional[int] = None,
) -> Optional[SpectralPeak]:
    """
    Strongest interior local maximum standing min_prominence_db above the floor.

    The floor is the larger of the median powers in the bands just below and
    just above the candidate, so a low-frequency plateau does not count as a peak.
    """
    power = spectrum.power[:, population]
    F = power.size
    halfwidth = floor_halfwidth or max(5, F // 8)
    best: Optional[SpectralPeak] = None
    for k in find_peaks(power)[0]:
        left = power[max(0, k - halfwidth):k]
        right = power[k + 1:k + 1 + halfwidth]
        if left.size == 0 or right.size == 0:
            continue
        floor = max(float(np.median(left)), float(np.median(right)))
        if floor <= 0:
            continue
        prominence = 10.0 * np.log10(power[k] / floor)
        if best is None or prominence > best.prominence_db:
            best = SpectralPeak(float(spectrum.frequencies[k]), float(power[k]), float(prominence), population)
    if best is None or best.prominence_db < min_prominence_db:
        return None
    return best
