"""Spectral characterisation: PSD, CMRR, -3 dB bandwidth, autocorrelation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.integrate import trapezoid


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectral density, V^2/Hz on a uniform frequency grid."""

    freqs: np.ndarray
    density: np.ndarray

    def __len__(self):
        return len(self.freqs)

    def __iter__(self):
        return zip(self.freqs.tolist(), self.density.tolist())

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def integrate(self) -> float:
        return float(trapezoid(self.density, self.freqs))


def psd_estimate(samples, sample_rate: float, segment_len: int = 4096, overlap: float = 0.5) -> Spectrum:
    """Welch estimate: Hann-windowed, mean-removed segments, averaged periodograms."""
    x = np.asarray(samples, dtype=float)
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise ValueError(f"segment_len must be a power of two, got {segment_len}")
    if segment_len > len(x):
        raise ValueError(f"segment_len {segment_len} exceeds sample count {len(x)}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    freqs, density = signal.welch(
        x,
        fs=sample_rate,
        window="hann",
        nperseg=segment_len,
        noverlap=int(overlap * segment_len),
        detrend="constant",
        scaling="density",
        return_onesided=True,
    )
    return Spectrum(freqs, density)


def _tone_peak(psd: Spectrum, f_tone: float, half_width: int) -> float:
    if not psd.freqs[0] <= f_tone <= psd.freqs[-1]:
        raise MeasurementError(f"tone at {f_tone:g} Hz outside the spectrum")
    k = int(round((f_tone - psd.freqs[0]) / psd.df))
    lo, hi = max(k - half_width, 0), min(k + half_width + 1, len(psd))
    return float(psd.density[lo:hi].max())


def cmrr_measure(psd_balanced: Spectrum, psd_single: Spectrum, f_tone: float, half_width: int = 2) -> float:
    """Peak-height difference at the tone, dB (single diode over balanced)."""
    if len(psd_balanced) != len(psd_single) or not np.allclose(psd_balanced.freqs, psd_single.freqs):
        raise MeasurementError("spectra must share one frequency grid")
    peak_single = _tone_peak(psd_single, f_tone, half_width)
    peak_balanced = _tone_peak(psd_balanced, f_tone, half_width)
    return 10.0 * np.log10(peak_single / peak_balanced)


def bandwidth_3db(
    psd: Spectrum,
    noise_floor: Spectrum | None = None,
    plateau_bins: int = 8,
    smooth_bins: int = 1,
    skip_bins: int = 2,
) -> float:
    """Lowest frequency where the floor-subtracted PSD drops 3 dB below its plateau.

    Bins below ``skip_bins`` carry the window leakage of the removed mean and
    are ignored. The plateau reference is the median of the next
    ``plateau_bins`` bins. ``smooth_bins`` (odd) applies a centred moving
    average before the crossing search; the crossing is interpolated linearly
    between bins.
    """
    density = np.asarray(psd.density, dtype=float)
    if noise_floor is not None:
        density = density - np.asarray(noise_floor.density, dtype=float)
    freqs = np.asarray(psd.freqs, dtype=float)[skip_bins:]
    density = density[skip_bins:]
    if smooth_bins > 1:
        half = smooth_bins // 2
        kernel = np.ones(2 * half + 1) / (2 * half + 1)
        density = np.convolve(np.pad(density, half, mode="edge"), kernel, mode="valid")
    plateau = float(np.median(density[:plateau_bins]))
    if plateau <= 0:
        raise MeasurementError("no low-frequency plateau above the noise floor")
    target = 0.5 * plateau
    below = np.flatnonzero(density[plateau_bins:] < target)
    if len(below) == 0:
        raise MeasurementError("bandwidth exceeds measurement band")
    k = int(below[0]) + plateau_bins
    f0, f1 = freqs[k - 1], freqs[k]
    d0, d1 = density[k - 1], density[k]
    return float(f0 + (d0 - target) * (f1 - f0) / (d0 - d1))


def autocorrelation(samples, max_lag: int) -> np.ndarray:
    """Normalised autocorrelation r(0..max_lag) of a mean-removed series."""
    x = np.asarray(samples, dtype=float)
    if max_lag < 0 or max_lag >= len(x) / 10:
        raise ValueError("max_lag must be below a tenth of the sample count")
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0:
        raise MeasurementError("autocorrelation undefined for a constant series")
    n = len(x)
    r = np.empty(max_lag + 1)
    r[0] = 1.0
    for k in range(1, max_lag + 1):
        r[k] = float(x[: n - k] @ x[k:]) / denom
    return r
