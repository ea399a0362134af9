"""Randomness tests after NIST SP 800-22 and the block success-rate protocol.

Nine tests are implemented natively. Each takes a 0/1 ``uint8`` array and
returns a list of ``TestResult`` (two for the cumulative-sums and serial
tests). The official minimum lengths are enforced unless ``strict=False``,
which exists for small worked examples.

``battery`` splits a stream into equal blocks, runs every requested test on
every block and reports the fraction of blocks passing at significance
``alpha``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import erfc, gammaincc, ndtr

from .fft import radix2_fft

ALPHA = 0.01
THRESHOLD = 0.98

EXTERNAL_TESTS = (
    "non_overlapping_template",
    "overlapping_template",
    "universal",
    "random_excursions",
    "random_excursions_variant",
    "linear_complexity",
)


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    name: str
    p_value: float
    statistic: float
    passed: bool

    @classmethod
    def make(cls, name: str, p_value: float, statistic: float, alpha: float = ALPHA) -> TestResult:
        p = min(max(float(p_value), 0.0), 1.0)
        return cls(name, p, float(statistic), p >= alpha)


def as_bits(data) -> np.ndarray:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    bits = np.asarray(data, dtype=np.uint8).ravel()
    if bits.size and bits.max() > 1:
        raise ValueError("bit arrays must contain only 0 and 1")
    return bits


def _need(ok: bool, msg: str):
    if not ok:
        raise InsufficientDataError(msg)


def igamc(a: float, x: float) -> float:
    return float(gammaincc(a, x))


def frequency(bits, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    n = len(b)
    _need(n >= (100 if strict else 1), "frequency test needs at least 100 bits")
    s = 2 * int(b.sum()) - n
    s_obs = abs(s) / math.sqrt(n)
    return [TestResult.make("frequency", erfc(s_obs / math.sqrt(2)), s_obs)]


def block_frequency(bits, block_size: int = 128, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    n, m = len(b), block_size
    n_blocks = n // m
    _need(n_blocks >= 1, "block frequency test needs at least one full block")
    if strict:
        _need(n >= 100 and m >= 20, "block frequency test needs n >= 100 and M >= 20")
    pi = b[: n_blocks * m].reshape(n_blocks, m).mean(axis=1)
    chi2 = 4.0 * m * float(((pi - 0.5) ** 2).sum())
    return [TestResult.make("block_frequency", igamc(n_blocks / 2, chi2 / 2), chi2)]


def _cusum_p(z: float, n: int) -> float:
    sq = math.sqrt(n)
    k1 = np.arange(math.ceil((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1)
    k2 = np.arange(math.ceil((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1)
    s1 = np.sum(ndtr((4 * k1 + 1) * z / sq) - ndtr((4 * k1 - 1) * z / sq))
    s2 = np.sum(ndtr((4 * k2 + 3) * z / sq) - ndtr((4 * k2 + 1) * z / sq))
    return float(1.0 - s1 + s2)


def cumulative_sums(bits, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    n = len(b)
    _need(n >= (100 if strict else 1), "cumulative sums test needs at least 100 bits")
    x = 2 * b.astype(np.int64) - 1
    results = []
    for name, seq in (("cumulative_sums_forward", x), ("cumulative_sums_backward", x[::-1])):
        z = int(np.abs(np.cumsum(seq)).max())
        results.append(TestResult.make(name, _cusum_p(z, n), z))
    return results


def runs(bits, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    n = len(b)
    _need(n >= (100 if strict else 2), "runs test needs at least 100 bits")
    pi = float(b.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        # frequency prerequisite failed
        return [TestResult.make("runs", 0.0, float("nan"))]
    v = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    num = abs(v - 2.0 * n * pi * (1 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1 - pi)
    return [TestResult.make("runs", erfc(num / den), v)]


# (block length, lowest category, highest category) by minimum sequence length
_LONGEST_RUN_LAYOUT = ((750_000, 10_000, 10, 16), (6272, 128, 4, 9), (128, 8, 1, 4))


@lru_cache(maxsize=None)
def longest_run_probabilities(block: int, low: int, high: int) -> tuple[float, ...]:
    """Exact category probabilities for the longest run of ones in ``block`` fair bits.

    Categories are ``<= low``, ``low + 1``, ..., ``high - 1``, ``>= high``.
    """

    def at_most(k: int) -> float:
        # state: length of the current trailing run of ones, capped at k
        dist = np.zeros(k + 1)
        dist[0] = 1.0
        for _ in range(block):
            nxt = np.zeros(k + 1)
            nxt[0] = 0.5 * dist.sum()
            nxt[1:] = 0.5 * dist[:-1]
            dist = nxt
        return float(dist.sum())

    cdf = [at_most(k) for k in range(low, high)]
    probs = [cdf[0]] + [cdf[i] - cdf[i - 1] for i in range(1, len(cdf))] + [1.0 - cdf[-1]]
    return tuple(probs)


def _longest_runs(blocks: np.ndarray) -> np.ndarray:
    n_blocks, m = blocks.shape
    padded = np.zeros((n_blocks, m + 2), dtype=np.int8)
    padded[:, 1:-1] = blocks
    d = np.diff(padded, axis=1)
    start_rows, start_cols = np.nonzero(d == 1)
    _, end_cols = np.nonzero(d == -1)
    longest = np.zeros(n_blocks, dtype=np.int64)
    np.maximum.at(longest, start_rows, end_cols - start_cols)
    return longest


def longest_run(bits, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    n = len(b)
    _need(n >= 128, "longest run test needs at least 128 bits")
    _, m, low, high = next(row for row in _LONGEST_RUN_LAYOUT if n >= row[0])
    n_blocks = n // m
    longest = _longest_runs(b[: n_blocks * m].reshape(n_blocks, m))
    counts = np.bincount(np.clip(longest, low, high) - low, minlength=high - low + 1)
    expected = n_blocks * np.asarray(longest_run_probabilities(m, low, high))
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    k = high - low
    return [TestResult.make("longest_run", igamc(k / 2, chi2 / 2), chi2)]


def gf2_rank(rows: np.ndarray, n_cols: int) -> np.ndarray:
    """Rank over GF(2) of many matrices at once.

    ``rows`` has shape (matrices, rows) and holds each row as an integer whose
    bit ``n_cols - 1`` is the first column.
    """
    rows = np.array(rows, dtype=np.uint64)
    n_mat, n_rows = rows.shape
    rank = np.zeros(n_mat, dtype=np.int64)
    row_idx = np.arange(n_rows)
    for c in range(n_cols):
        shift = np.uint64(n_cols - 1 - c)
        bit = ((rows >> shift) & np.uint64(1)).astype(bool)
        eligible = bit & (row_idx[None, :] >= rank[:, None])
        has = np.flatnonzero(eligible.any(axis=1))
        if len(has) == 0:
            continue
        piv = eligible[has].argmax(axis=1)
        r = rank[has]
        pivot_rows = rows[has, piv].copy()
        rows[has, piv] = rows[has, r]
        rows[has, r] = pivot_rows
        sub = rows[has]
        clear = ((sub >> shift) & np.uint64(1)).astype(bool)
        clear[np.arange(len(has)), r] = False
        sub ^= np.where(clear, pivot_rows[:, None], np.uint64(0))
        rows[has] = sub
        rank[has] += 1
    return rank


def rank_probability(r: int, m: int, q: int) -> float:
    """Probability that a random m x q binary matrix has rank r."""
    log2p = r * (q + m - r) - m * q
    prod = 1.0
    for i in range(r):
        prod *= (1 - 2.0 ** (i - q)) * (1 - 2.0 ** (i - m)) / (1 - 2.0 ** (i - r))
    return 2.0**log2p * prod


def rank(bits, rows: int = 32, cols: int = 32, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    size = rows * cols
    n_mat = len(b) // size
    _need(n_mat >= (38 if strict else 1), "rank test needs at least 38 matrices")
    if cols > 64:
        raise ValueError("rank test supports at most 64 columns")
    weights = (1 << np.arange(cols - 1, -1, -1, dtype=np.uint64)).astype(np.uint64)
    mats = b[: n_mat * size].reshape(n_mat, rows, cols).astype(np.uint64)
    packed = (mats * weights).sum(axis=2, dtype=np.uint64)
    ranks = gf2_rank(packed, cols)
    full = min(rows, cols)
    observed = np.array([(ranks == full).sum(), (ranks == full - 1).sum(), (ranks < full - 1).sum()], dtype=float)
    p_full = rank_probability(full, rows, cols)
    p_less = rank_probability(full - 1, rows, cols)
    expected = n_mat * np.array([p_full, p_less, 1.0 - p_full - p_less])
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    return [TestResult.make("rank", math.exp(-chi2 / 2), chi2)]


def dft(bits, strict: bool = True) -> list[TestResult]:
    """Spectral test on the longest power-of-two prefix of the sequence."""
    b = as_bits(bits)
    _need(len(b) >= (1000 if strict else 2), "spectral test needs at least 1000 bits")
    n = 1 << (len(b).bit_length() - 1)
    x = 2.0 * b[:n] - 1.0
    modulus = np.abs(radix2_fft(x)[: n // 2])
    threshold = math.sqrt(math.log(1 / 0.05) * n)
    n0 = 0.95 * n / 2
    n1 = int(np.count_nonzero(modulus < threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4)
    return [TestResult.make("dft", erfc(abs(d) / math.sqrt(2)), d)]


def _pattern_counts(b: np.ndarray, m: int) -> np.ndarray:
    """Counts of all overlapping m-bit patterns, wrapping around the end."""
    n = len(b)
    if m == 0:
        return np.array([n])
    ext = np.concatenate((b, b[: m - 1])).astype(np.int64)
    values = np.zeros(n, dtype=np.int64)
    for k in range(m):
        values = (values << 1) | ext[k : k + n]
    return np.bincount(values, minlength=1 << m)


def _phi(b: np.ndarray, m: int) -> float:
    c = _pattern_counts(b, m) / len(b)
    c = c[c > 0]
    return float((c * np.log(c)).sum())


def approximate_entropy(bits, block_size: int = 10, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    n, m = len(b), block_size
    if strict:
        _need(m < int(math.log2(n)) - 5, "approximate entropy needs m < log2(n) - 5")
    _need(n > m >= 1, "approximate entropy needs 1 <= m < n")
    apen = _phi(b, m) - _phi(b, m + 1)
    chi2 = 2.0 * n * (math.log(2) - apen)
    return [TestResult.make("approximate_entropy", igamc(2 ** (m - 1), chi2 / 2), chi2)]


def _psi2(b: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = _pattern_counts(b, m).astype(float)
    n = len(b)
    return float((2.0**m / n) * (counts @ counts) - n)


def serial(bits, block_size: int = 16, strict: bool = True) -> list[TestResult]:
    b = as_bits(bits)
    n, m = len(b), block_size
    if strict:
        _need(m < int(math.log2(n)) - 2, "serial test needs m < log2(n) - 2")
    _need(n > m >= 2, "serial test needs 2 <= m < n")
    psi = [_psi2(b, m - k) for k in range(3)]
    del1 = psi[0] - psi[1]
    del2 = psi[0] - 2 * psi[1] + psi[2]
    return [
        TestResult.make("serial_1", igamc(2 ** (m - 2), del1 / 2), del1),
        TestResult.make("serial_2", igamc(2 ** (m - 3), del2 / 2), del2),
    ]


TESTS: dict[str, Callable[..., list[TestResult]]] = {
    "frequency": frequency,
    "block_frequency": block_frequency,
    "cumulative_sums": cumulative_sums,
    "runs": runs,
    "longest_run": longest_run,
    "rank": rank,
    "dft": dft,
    "approximate_entropy": approximate_entropy,
    "serial": serial,
}


@dataclass
class SuiteReport:
    success_rates: dict[str, float]
    block_count: int
    bits_per_block: int
    threshold: float = THRESHOLD
    alpha: float = ALPHA
    skipped: dict[str, str] = field(default_factory=dict)
    uniformity: dict[str, float] = field(default_factory=dict)
    external: tuple[str, ...] = EXTERNAL_TESTS

    @property
    def passed(self) -> bool:
        return bool(self.success_rates) and all(r >= self.threshold for r in self.success_rates.values())

    def failures(self) -> list[str]:
        return [k for k, r in self.success_rates.items() if r < self.threshold]

    def to_dict(self) -> dict:
        return {
            "block_count": self.block_count,
            "bits_per_block": self.bits_per_block,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "success_rates": dict(self.success_rates),
            "uniformity_p": dict(self.uniformity),
            "skipped": dict(self.skipped),
            "external": {name: "external/skipped" for name in self.external},
            "passed": self.passed,
        }


def uniformity_p(p_values) -> float:
    """Chi-square check that p-values are uniform over ten equal bins."""
    p = np.asarray(p_values, dtype=float)
    counts = np.histogram(np.minimum(p, 1 - 1e-12), bins=10, range=(0, 1))[0]
    expected = len(p) / 10
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    return igamc(9 / 2, chi2 / 2)


def battery(
    bits,
    block_bits: int = 1_000_000,
    tests=None,
    alpha: float = ALPHA,
    threshold: float = THRESHOLD,
    max_blocks: int | None = None,
    workers: int = 1,
) -> SuiteReport:
    b = as_bits(bits)
    names = list(TESTS) if tests is None else list(tests)
    unknown = [t for t in names if t not in TESTS]
    if unknown:
        raise ValueError(f"unknown tests {unknown}; available: {sorted(TESTS)}")
    n_blocks = len(b) // block_bits
    if max_blocks is not None:
        n_blocks = min(n_blocks, max_blocks)
    if n_blocks < 1:
        raise ValueError(f"need at least {block_bits} bits for one block, got {len(b)}")

    def run_block(i: int) -> dict[str, list[TestResult] | str]:
        block = b[i * block_bits : (i + 1) * block_bits]
        out = {}
        for name in names:
            try:
                out[name] = TESTS[name](block)
            except InsufficientDataError as exc:
                out[name] = str(exc)
        return out

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_block = list(pool.map(run_block, range(n_blocks)))
    else:
        per_block = [run_block(i) for i in range(n_blocks)]

    p_values: dict[str, list[float]] = {}
    passes: dict[str, int] = {}
    skipped: dict[str, str] = {}
    for name in names:
        for block in per_block:
            outcome = block[name]
            if isinstance(outcome, str):
                skipped[name] = outcome
                break
            for res in outcome:
                p_values.setdefault(res.name, []).append(res.p_value)
                passes[res.name] = passes.get(res.name, 0) + (res.p_value >= alpha)
    rates = {k: passes[k] / n_blocks for k in p_values}
    uniform = {k: uniformity_p(v) for k, v in p_values.items()}
    return SuiteReport(rates, n_blocks, block_bits, threshold, alpha, skipped, uniform)


def export_ascii(bits, path) -> Path:
    """Write a stream as ASCII '0'/'1' characters, the reference suite's text input."""
    b = as_bits(bits)
    path = Path(path)
    path.write_bytes((b + ord("0")).astype(np.uint8).tobytes())
    return path
