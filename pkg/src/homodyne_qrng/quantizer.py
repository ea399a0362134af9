"""ADC binning of analog samples and min-entropy of the binned distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr


@dataclass(frozen=True)
class BinningConfig:
    """``2**n_bits`` equal bins spanning [-full_scale, +full_scale] volts."""

    n_bits: int = 8
    full_scale: float = 1.0

    def __post_init__(self):
        if int(self.n_bits) != self.n_bits or not 1 <= self.n_bits <= 16:
            raise ValueError(f"n_bits must be an integer in [1, 16], got {self.n_bits}")
        if not self.full_scale > 0:
            raise ValueError(f"full_scale must be > 0, got {self.full_scale}")

    @property
    def n_codes(self) -> int:
        return 1 << self.n_bits

    @property
    def bin_width(self) -> float:
        return 2.0 * self.full_scale / self.n_codes

    @property
    def edges(self) -> np.ndarray:
        return -self.full_scale + self.bin_width * np.arange(self.n_codes + 1)


@dataclass(frozen=True)
class EntropyReport:
    min_entropy_bits: float
    max_bin_probability: float
    sigma_sn: float
    binning: BinningConfig


def quantize(samples, binning: BinningConfig) -> np.ndarray:
    """Map volts to integer codes; out-of-range samples clamp to the edge codes."""
    v = np.asarray(samples, dtype=float)
    codes = np.floor((v + binning.full_scale) * (binning.n_codes / (2.0 * binning.full_scale)))
    codes = np.clip(codes, 0, binning.n_codes - 1)
    return codes.astype(np.uint8 if binning.n_bits <= 8 else np.uint16)


def bin_probabilities(sigma: float, binning: BinningConfig) -> np.ndarray:
    """Code probabilities of a zero-mean Gaussian, edge codes holding the tails."""
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    z = binning.edges / sigma
    half = binning.n_codes // 2
    # lower half from the left tail, upper half from the right tail, so that
    # no bin is a difference of two numbers close to one
    lower = ndtr(z[: half + 1])
    lower[0] = 0.0
    upper = ndtr(-z[half:])
    upper[-1] = 0.0
    return np.concatenate((np.diff(lower), -np.diff(upper)))


def min_entropy(sigma_sn: float, binning: BinningConfig) -> EntropyReport:
    """-log2 of the most likely code for the shot-noise distribution.

    For a zero-mean Gaussian the candidates are the two central codes and the
    clamped edge codes; taking the maximum over all codes covers both.
    """
    p = bin_probabilities(sigma_sn, binning)
    p_max = float(p.max())
    return EntropyReport(-math.log2(p_max), p_max, float(sigma_sn), binning)


@dataclass(frozen=True)
class EmpiricalEntropy:
    bits: float
    max_frequency: float
    n_samples: int
    undersampled: bool


def empirical_min_entropy(codes, n_bits: int | None = None) -> EmpiricalEntropy:
    """-log2 of the most frequent code.

    ``undersampled`` flags inputs with fewer than ``100 * 2**n_bits`` samples.
    """
    c = np.asarray(codes).ravel()
    if c.size == 0:
        raise ValueError("no codes")
    counts = np.bincount(c.astype(np.int64))
    p_max = counts.max() / c.size
    n_codes = 1 << n_bits if n_bits is not None else len(counts)
    return EmpiricalEntropy(
        bits=float(-math.log2(p_max)) + 0.0,
        max_frequency=float(p_max),
        n_samples=int(c.size),
        undersampled=c.size < 100 * n_codes,
    )


def codes_to_bits(codes, n_bits: int) -> np.ndarray:
    """Expand codes into a 0/1 array, most significant bit of each code first."""
    c = np.asarray(codes).ravel()
    if n_bits == 8:
        return np.unpackbits(c.astype(np.uint8))
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.uint32)
    return ((c.astype(np.uint32)[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def pack_bits(bits) -> bytes:
    """0/1 array to bytes, MSB first; a short final byte is zero padded."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, n_bits: int | None = None) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return bits if n_bits is None else bits[:n_bits]
