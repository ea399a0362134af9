"""Toeplitz-hashing randomness extraction over GF(2).

The ``m x n`` matrix is ``T[i, j] = seed[i - j + n - 1]`` for a seed of
``n + m - 1`` bits, and one block maps ``x -> T x (mod 2)``. The same seed is
reused for every block, which is allowed because Toeplitz hashing is a strong
extractor; the seed is kept in the run report so the output can be audited.

Bit strings are numpy ``uint8`` arrays of 0/1 values; byte streams are packed
most-significant-bit first.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels, rng

# below this many blocks the per-batch table construction does not pay off
BATCH_THRESHOLD = 16


class BlockTooSmallError(ValueError):
    """The block carries too little min-entropy for the requested security."""


@dataclass(frozen=True)
class ExtractorParams:
    n_in: int
    m_out: int
    epsilon: float = 2.0**-50

    def __post_init__(self):
        if not 1 <= self.m_out < self.n_in:
            raise ValueError(f"need 1 <= m_out < n_in, got m_out={self.m_out}, n_in={self.n_in}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @property
    def seed_length(self) -> int:
        return self.n_in + self.m_out - 1

    @classmethod
    def for_source(
        cls, samples_per_block: int, bits_per_sample: int, h_inf_per_sample: float, epsilon: float = 2.0**-50
    ) -> ExtractorParams:
        """Size a block of whole samples from its min-entropy."""
        if h_inf_per_sample > bits_per_sample:
            raise ValueError("min-entropy per sample cannot exceed the bits per sample")
        m = output_length(samples_per_block, h_inf_per_sample, epsilon)
        return cls(samples_per_block * bits_per_sample, m, epsilon)


@dataclass(frozen=True, eq=False)
class ToeplitzSeed:
    bits: np.ndarray
    provenance: str = "unspecified"

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or np.any(bits > 1):
            raise ValueError("seed must be a 1-D array of 0/1 values")
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return len(self.bits)

    def __eq__(self, other):
        return isinstance(other, ToeplitzSeed) and np.array_equal(self.bits, other.bits)

    def to_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, length: int, provenance: str = "hex") -> ToeplitzSeed:
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))
        if len(bits) < length:
            raise ValueError("hex string shorter than the requested seed length")
        return cls(bits[:length], provenance)

    def words(self, n_in: int, m_out: int) -> np.ndarray:
        """Packed LSB-first uint64 words, zero padded for the kernels."""
        n_words = ((n_in - 1) >> 6) + ((m_out + 63) >> 6) + 2
        padded = np.zeros(n_words * 64, dtype=np.uint8)
        padded[: len(self.bits)] = self.bits
        return np.packbits(padded.reshape(-1, 8), axis=1, bitorder="little").ravel().view("<u8").copy()


def output_length(samples_per_block: int, h_inf_per_sample: float, epsilon: float = 2.0**-50) -> int:
    """Leftover-hash output size: ``floor(k * H - 2 log2(1/eps))``."""
    if not h_inf_per_sample > 0:
        raise ValueError("min-entropy per sample must be positive")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    m = math.floor(samples_per_block * h_inf_per_sample - 2.0 * math.log2(1.0 / epsilon) + 1e-9)
    if m <= 0:
        raise BlockTooSmallError(
            f"{samples_per_block} samples at {h_inf_per_sample:.4g} bits each cannot cover "
            f"the 2 log2(1/eps) = {2 * math.log2(1 / epsilon):.4g} bit penalty"
        )
    return m


def seed_generate(length: int, entropy_source: str = "prng", rng_seed: int | None = None) -> ToeplitzSeed:
    """Seed bits from the seeded PCG64 stream (``"prng"``) or from ``os.urandom``."""
    if length < 1:
        raise ValueError("seed length must be >= 1")
    if entropy_source == "prng":
        if rng_seed is None:
            raise ValueError("the prng source needs rng_seed")
        bits = rng.generator(rng.child(rng_seed, "toeplitz-seed")).integers(0, 2, length, dtype=np.uint8)
        return ToeplitzSeed(bits, f"pcg64:{rng_seed}")
    if entropy_source == "system":
        raw = np.frombuffer(os.urandom(-(-length // 8)), dtype=np.uint8)
        return ToeplitzSeed(np.unpackbits(raw)[:length], "os.urandom")
    raise ValueError(f"unknown entropy source {entropy_source!r}")


def _check(x, seed: ToeplitzSeed, params: ExtractorParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if x.shape[-1] != params.n_in:
        raise ValueError(f"input has {x.shape[-1]} bits, expected n_in={params.n_in}")
    if len(seed) != params.seed_length:
        raise ValueError(f"seed has {len(seed)} bits, expected n_in + m_out - 1 = {params.seed_length}")
    return x


def toeplitz_matrix(seed: ToeplitzSeed, params: ExtractorParams) -> np.ndarray:
    """Read-only ``m_out x n_in`` view with ``T[i, j] = seed[i - j + n - 1]``."""
    n = params.n_in
    return sliding_window_view(seed.bits, n)[: params.m_out, ::-1]


def extract_naive(x, seed: ToeplitzSeed, params: ExtractorParams) -> np.ndarray:
    """Reference product: XOR of the matrix columns selected by ``x``."""
    x = _check(x, seed, params)
    cols = np.flatnonzero(x)
    if len(cols) == 0:
        return np.zeros(params.m_out, dtype=np.uint8)
    return np.bitwise_xor.reduce(toeplitz_matrix(seed, params)[:, cols], axis=1)


def _words_to_bits(y: np.ndarray, m: int) -> np.ndarray:
    return np.unpackbits(y.astype("<u8").view(np.uint8), axis=1, bitorder="little")[:, :m]


def extract_packed(xb: np.ndarray, seed: ToeplitzSeed, params: ExtractorParams) -> np.ndarray:
    """Extract a batch given MSB-first packed input rows of ``ceil(n_in / 8)`` bytes.

    Padding bits in the last byte of each row must be zero. Returns a 0/1
    array of shape ``(blocks, m_out)``.
    """
    xb = np.ascontiguousarray(xb, dtype=np.uint8)
    if xb.ndim != 2 or xb.shape[1] != -(-params.n_in // 8):
        raise ValueError("packed input must have shape (blocks, ceil(n_in / 8))")
    if len(seed) != params.seed_length:
        raise ValueError(f"seed has {len(seed)} bits, expected {params.seed_length}")
    sw = seed.words(params.n_in, params.m_out)
    kernel = _kernels.four_russians if len(xb) >= BATCH_THRESHOLD else _kernels.xor_columns
    return _words_to_bits(kernel(xb, sw, params.n_in, params.m_out), params.m_out)


def extract_blocked(x, seed: ToeplitzSeed, params: ExtractorParams) -> np.ndarray:
    """Word-parallel product; ``x`` is one block (1-D) or a batch (2-D)."""
    x = _check(x, seed, params)
    single = x.ndim == 1
    y = extract_packed(np.packbits(np.atleast_2d(x), axis=1), seed, params)
    return y[0] if single else y


def extract_stream(data: bytes, seed: ToeplitzSeed, params: ExtractorParams) -> bytes:
    """Hash a packed raw stream block by block; a trailing partial block is dropped."""
    raw = np.frombuffer(data, dtype=np.uint8)
    n_blocks = len(raw) * 8 // params.n_in
    if params.n_in % 8 == 0:
        xb = raw[: n_blocks * params.n_in // 8].reshape(n_blocks, -1)
    else:
        bits = np.unpackbits(raw)[: n_blocks * params.n_in].reshape(n_blocks, -1)
        xb = np.packbits(bits, axis=1)
    return np.packbits(extract_packed(xb, seed, params)).tobytes()
