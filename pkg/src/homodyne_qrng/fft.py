"""Iterative radix-2 decimation-in-time FFT, vectorised per stage."""

import numpy as np


def bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def radix2_fft(x) -> np.ndarray:
    """DFT ``X[k] = sum_t x[t] exp(-2 pi i k t / N)`` for power-of-two ``N``."""
    a = np.asarray(x, dtype=complex)
    n = a.size
    if n == 0 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    a = a[bit_reverse_permutation(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(-1, size)
        even = blocks[:, :half]
        odd = blocks[:, half:] * twiddle
        a = np.concatenate((even + odd, even - odd), axis=1).ravel()
        size *= 2
    return a
