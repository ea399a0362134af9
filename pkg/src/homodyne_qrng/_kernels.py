"""Word-level GF(2) Toeplitz kernels (numba).

Internal layout: the seed is packed LSB-first into uint64 words with zero
padding at the end; outputs are returned the same way, one row of
``ceil(m / 64)`` words per block. Inputs arrive as MSB-first bytes, so bit
``7 - t`` of byte ``g`` is input bit ``j = 8 g + t``.

Column ``j`` of the matrix is the seed window starting at ``n - 1 - j``,
which makes ``y = XOR of column j over set bits j``.
"""

import numpy as np
from numba import njit

_U64 = np.uint64


@njit(cache=True, inline="always")
def _column(sw, n, j, out):
    """Seed window for column ``j`` (zero for padding columns j >= n)."""
    W = out.shape[0]
    if j >= n:
        for w in range(W):
            out[w] = 0
        return
    off = n - 1 - j
    q = off >> 6
    r = off & 63
    if r == 0:
        for w in range(W):
            out[w] = sw[q + w]
    else:
        sr = _U64(r)
        sl = _U64(64 - r)
        for w in range(W):
            out[w] = (sw[q + w] >> sr) | (sw[q + w + 1] << sl)


@njit(cache=True)
def xor_columns(xb, sw, n, m):
    """One pass per block over its set bits; cheapest for a handful of blocks."""
    B, G = xb.shape
    W = (m + 63) >> 6
    y = np.zeros((B, W), np.uint64)
    col = np.empty(W, np.uint64)
    for b in range(B):
        yb = y[b]
        for g in range(G):
            byte = xb[b, g]
            if byte == 0:
                continue
            for t in range(8):
                if (byte >> (7 - t)) & 1:
                    _column(sw, n, 8 * g + t, col)
                    for w in range(W):
                        yb[w] ^= col[w]
    return y


@njit(cache=True)
def _byte_table(table, sw, n, g, col):
    """All 256 XOR combinations of the eight columns behind input byte ``g``."""
    W = table.shape[1]
    for w in range(W):
        table[0, w] = 0
    for t in range(7, -1, -1):
        _column(sw, n, 8 * g + t, col)
        half = 1 << (7 - t)
        for e in range(half):
            for w in range(W):
                table[e | half, w] = table[e, w] ^ col[w]


@njit(cache=True)
def four_russians(xb, sw, n, m):
    """Byte-indexed lookup tables shared across a batch of blocks.

    Four tables are built at a time and applied together, so each output row
    is read and written once per 32 input bits.
    """
    B, G = xb.shape
    W = (m + 63) >> 6
    y = np.zeros((B, W), np.uint64)
    t0 = np.empty((256, W), np.uint64)
    t1 = np.empty((256, W), np.uint64)
    t2 = np.empty((256, W), np.uint64)
    t3 = np.empty((256, W), np.uint64)
    col = np.empty(W, np.uint64)
    g = 0
    while g + 4 <= G:
        _byte_table(t0, sw, n, g, col)
        _byte_table(t1, sw, n, g + 1, col)
        _byte_table(t2, sw, n, g + 2, col)
        _byte_table(t3, sw, n, g + 3, col)
        for b in range(B):
            r0 = t0[xb[b, g]]
            r1 = t1[xb[b, g + 1]]
            r2 = t2[xb[b, g + 2]]
            r3 = t3[xb[b, g + 3]]
            yb = y[b]
            for w in range(W):
                yb[w] ^= r0[w] ^ r1[w] ^ r2[w] ^ r3[w]
        g += 4
    while g < G:
        _byte_table(t0, sw, n, g, col)
        for b in range(B):
            r0 = t0[xb[b, g]]
            yb = y[b]
            for w in range(W):
                yb[w] ^= r0[w]
        g += 1
    return y
