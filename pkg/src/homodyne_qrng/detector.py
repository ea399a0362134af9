"""Balanced detector output synthesis and the noise/efficiency algebra.

Signal chain per output sample::

    v = shot + electronic (+ LO tone)

* shot: vacuum-normalised quadrature noise of the (lossy) signal mode times
  the shot-noise voltage scale, low-pass filtered by a single pole at ``f3db``.
  The filter is the exact sampled form of a continuous single-pole response,
  an AR(1) process with coefficient ``exp(-2 pi f3db / fs)`` started in its
  stationary state, so the output variance does not depend on the sample rate.
* electronic: white Gaussian noise with RMS ``sigma_en`` at the output.
* tone: fundamental of the pulsed-LO common-mode signal at ``lo_rep_rate``,
  suppressed by ``cmrr_db`` when both photodiodes are connected.

Each component draws from its own substream of the trace seed
(``shot``, ``electronic``, ``tone``), so switching ``mode`` never changes the
noise realisations that the modes share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy import constants
from scipy.signal import lfilter

from . import rng
from .optics import GaussianState, LossChannel, apply_loss, quadrature_mean, quadrature_variance

MODES = ("balanced", "single_diode", "dark")


class ConfigError(ValueError):
    pass


class NegativeShotNoiseError(ValueError):
    """Raw variance below the electronic floor; the calibration is inconsistent."""


@dataclass(frozen=True)
class DetectorConfig:
    """Detector physics, SI units throughout.

    Defaults are the on-chip detector operating point: 0.8 A/W per diode,
    eta_pd = 0.64, 160 MHz bandwidth, 28 dB CMRR, 200 MS/s sampling. The
    electronic-noise RMS is set so that 5.6 mW of LO sits 10 dB above it.
    """

    lo_power: float = 5.6e-3
    responsivity: float = 0.8
    eta_pd: float = 0.64
    tia_gain: float = 1.0e4
    sigma_en: float = 2.0e-3
    f3db: float = 160e6
    cmrr_db: float = 28.0
    sample_rate: float = 200e6
    lo_rep_rate: float | None = None

    def __post_init__(self):
        checks = [
            (self.lo_power >= 0, "lo_power must be >= 0"),
            (self.responsivity > 0, "responsivity must be > 0"),
            (0 < self.eta_pd <= 1, "eta_pd must lie in (0, 1]"),
            (self.tia_gain > 0, "tia_gain must be > 0"),
            (self.sigma_en >= 0, "sigma_en must be >= 0"),
            (self.f3db > 0, "f3db must be > 0"),
            (self.cmrr_db >= 0, "cmrr_db must be >= 0"),
            (self.sample_rate > 0, "sample_rate must be > 0"),
            (self.lo_rep_rate is None or 0 < self.lo_rep_rate < self.sample_rate / 2,
             "lo_rep_rate must lie below Nyquist"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def with_(self, **changes) -> DetectorConfig:
        return replace(self, **changes)

    @property
    def noise_bandwidth(self) -> float:
        """Equivalent noise bandwidth of the single-pole response."""
        return 0.5 * math.pi * self.f3db

    @property
    def shot_noise_variance(self) -> float:
        """Output variance of vacuum shot noise, V^2.

        Balanced subtraction leaves the shot noise of the total photocurrent
        ``I = R * P_LO``: ``G^2 * 2 q I * B_enb``.
        """
        current = self.responsivity * self.lo_power
        return self.tia_gain**2 * 2.0 * constants.e * current * self.noise_bandwidth

    @property
    def tone_amplitude(self) -> float:
        """Single-diode amplitude of the LO repetition-rate fundamental, V.

        One diode carries mean current ``R P / 2``; a short-pulse train puts
        twice the mean into its fundamental.
        """
        return self.tia_gain * self.responsivity * self.lo_power

    @property
    def ar_coefficient(self) -> float:
        return math.exp(-2.0 * math.pi * self.f3db / self.sample_rate)


@dataclass(frozen=True)
class TraceStats:
    var_o: float
    var_en: float
    var_sn: float
    clearance_db: float

    @classmethod
    def from_variances(cls, var_o: float, var_en: float) -> TraceStats:
        return cls(var_o, var_en, noise_subtract(var_o, var_en), clearance_db(var_o, var_en))

    @property
    def eta_snr(self) -> float:
        return efficiency_snr(self.var_o, self.var_en)


def noise_subtract(var_o: float, var_en: float) -> float:
    if var_en < 0:
        raise ValueError("electronic variance must be >= 0")
    if var_o < var_en:
        raise NegativeShotNoiseError(
            f"raw variance {var_o:.6g} below electronic variance {var_en:.6g}"
        )
    return var_o - var_en


def efficiency_snr(var_o: float, var_en: float) -> float:
    if var_o == 0:
        raise ZeroDivisionError("raw output variance is zero")
    if var_en == 0:
        return 1.0
    return noise_subtract(var_o, var_en) / var_o


def total_efficiency(eta_pd: float, eta_snr: float) -> float:
    for name, value in (("eta_pd", eta_pd), ("eta_snr", eta_snr)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return eta_pd * eta_snr


def clearance_db(var_o: float, var_en: float) -> float:
    if var_en == 0:
        return math.inf
    return 10.0 * math.log10(var_o / var_en)


def expected_stats(config: DetectorConfig, state: GaussianState | None = None, phi: float = 0.0) -> TraceStats:
    """Noise-free variances of a balanced trace."""
    var_o = config.shot_noise_variance * _state_moments(config, state, phi)[1] + config.sigma_en**2
    return TraceStats.from_variances(var_o, config.sigma_en**2)


def sigma_en_for_clearance(config: DetectorConfig, target_db: float) -> float:
    """Electronic RMS that puts vacuum shot noise ``target_db`` above it."""
    ratio = 10.0 ** (target_db / 10.0)
    if ratio <= 1:
        raise ValueError("clearance must be positive in dB")
    return math.sqrt(config.shot_noise_variance / (ratio - 1.0))


def lo_power_for_clearance(config: DetectorConfig, target_db: float) -> float:
    ratio = 10.0 ** (target_db / 10.0)
    per_watt = config.with_(lo_power=1.0).shot_noise_variance
    return (ratio - 1.0) * config.sigma_en**2 / per_watt


def operating_point(clearance: float = 10.0, **overrides) -> DetectorConfig:
    """Default detector with ``sigma_en`` set for the requested vacuum clearance."""
    config = DetectorConfig(**overrides)
    if "sigma_en" in overrides:
        return config
    return config.with_(sigma_en=sigma_en_for_clearance(config, clearance))


def _state_moments(config, state, phi):
    if state is None:
        return 0.0, 1.0
    lossy = apply_loss(state, LossChannel(config.eta_pd))
    return quadrature_mean(lossy, phi), quadrature_variance(lossy, phi)


def iter_trace(
    config: DetectorConfig,
    seed: int | np.random.SeedSequence,
    mode: str = "balanced",
    state: GaussianState | None = None,
    phi: float = 0.0,
) -> Iterator[np.ndarray]:
    """Endless output trace in consecutive chunks of ``rng.CHUNK`` samples."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    seq = rng.as_seed_sequence(seed)
    electronic = rng.iter_standard_normals(rng.child(seq, "electronic"))
    shot = rng.iter_standard_normals(rng.child(seq, "shot"))

    mean, var = _state_moments(config, state, phi)
    if mode == "single_diode":
        # one diode: half the shot noise, no quadrature information
        shot_scale, shot_mean = math.sqrt(config.shot_noise_variance / 2.0), 0.0
    else:
        shot_scale = math.sqrt(config.shot_noise_variance * var)
        shot_mean = math.sqrt(config.shot_noise_variance) * mean

    a = config.ar_coefficient
    b = [math.sqrt(1.0 - a * a)]
    zi = None

    tone_amp = 0.0
    if config.lo_rep_rate is not None and mode != "dark":
        tone_amp = config.tone_amplitude
        if mode == "balanced":
            tone_amp *= 10.0 ** (-config.cmrr_db / 20.0)
    tone_phase = rng.generator(rng.child(seq, "tone")).uniform(0.0, 2.0 * math.pi)
    omega = 2.0 * math.pi * (config.lo_rep_rate or 0.0) / config.sample_rate

    start = 0
    while True:
        out = config.sigma_en * next(electronic)
        w = next(shot)
        if mode != "dark":
            if zi is None:
                # stationary start: y[0] = w[0]
                y0 = w[0]
                rest, zf = lfilter(b, [1.0, -a], w[1:], zi=[a * y0])
                u = np.concatenate(([y0], rest))
            else:
                u, zf = lfilter(b, [1.0, -a], w, zi=zi)
            zi = zf
            out += shot_mean + shot_scale * u
            if tone_amp:
                t = np.arange(start, start + len(out), dtype=float)
                out += tone_amp * np.cos(omega * t + tone_phase)
        start += len(out)
        yield out


def synthesize_trace(
    config: DetectorConfig,
    n_samples: int,
    seed: int | np.random.SeedSequence,
    mode: str = "balanced",
    state: GaussianState | None = None,
    phi: float = 0.0,
) -> np.ndarray:
    """First ``n_samples`` volts of the trace defined by ``iter_trace``."""
    if n_samples <= 0:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        return np.empty(0)
    parts, have = [], 0
    for chunk in iter_trace(config, seed, mode, state, phi):
        parts.append(chunk[: n_samples - have])
        have += len(parts[-1])
        if have >= n_samples:
            break
    return np.concatenate(parts)


def measure_stats(config: DetectorConfig, n_samples: int, seed: int, state=None, phi=0.0) -> TraceStats:
    """Dark and balanced traces from one seed, reduced to noise-subtracted variances."""
    dark = synthesize_trace(config, n_samples, seed, "dark")
    raw = synthesize_trace(config, n_samples, seed, "balanced", state, phi)
    return TraceStats.from_variances(float(np.var(raw)), float(np.var(dark)))


class PowerPoint(NamedTuple):
    power: float
    var_o: float
    var_sn: float


def variance_vs_power(
    config: DetectorConfig,
    powers: Sequence[float],
    n_samples: int,
    seed: int,
    analytic: bool = False,
) -> list[PowerPoint]:
    """Raw and noise-subtracted variance at each LO power.

    The electronic floor is measured once from a dark trace; each power gets
    its own derived trace seed.
    """
    powers = [float(p) for p in powers]
    if len({p for p in powers if p > 0}) < 3:
        raise ValueError("need at least three distinct nonzero powers")
    if analytic:
        var_en = config.sigma_en**2
    else:
        var_en = float(np.var(synthesize_trace(config, n_samples, rng.child(seed, "dark"), "dark")))
    points = []
    for i, p in enumerate(powers):
        cfg = config.with_(lo_power=p)
        if analytic:
            var_o = cfg.shot_noise_variance + var_en
        else:
            trace = synthesize_trace(cfg, n_samples, rng.child(seed, "power", i), "balanced")
            var_o = float(np.var(trace))
        points.append(PowerPoint(p, var_o, noise_subtract(var_o, var_en)))
    return points


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    stderr_slope: float


def loglog_fit(points: Sequence[tuple[float, float]]) -> LogLogFit:
    """Least-squares line through (log10 x, log10 y)."""
    data = np.asarray(points, dtype=float)
    x, y = data[:, 0], data[:, 1]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs strictly positive values")
    if len(np.unique(x)) < 2:
        raise ValueError("need at least two distinct x values")
    lx, ly = np.log10(x), np.log10(y)
    dx = lx - lx.mean()
    sxx = float(dx @ dx)
    slope = float(dx @ (ly - ly.mean())) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    n = len(lx)
    if n > 2:
        resid = ly - (intercept + slope * lx)
        stderr = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    else:
        stderr = float("nan")
    return LogLogFit(slope, intercept, stderr)
