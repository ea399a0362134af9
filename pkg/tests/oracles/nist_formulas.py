"""High-precision p-value formulas written directly from the test definitions (mpmath).

Deliberately naive: plain Python loops over bits, arbitrary-precision special
functions, no shared code with the package.
"""

import itertools

import mpmath as mp

mp.mp.dps = 40


def _pm(bits):
    return [2 * int(b) - 1 for b in bits]


def igamc(a, x):
    return mp.gammainc(a, x, mp.inf, regularized=True)


def frequency(bits):
    n = len(bits)
    s = abs(sum(_pm(bits)))
    return mp.erfc(s / mp.sqrt(2 * n))


def block_frequency(bits, m):
    N = len(bits) // m
    chi2 = 0
    for i in range(N):
        pi = mp.mpf(sum(int(b) for b in bits[i * m : (i + 1) * m])) / m
        chi2 += (pi - mp.mpf(1) / 2) ** 2
    chi2 *= 4 * m
    return igamc(mp.mpf(N) / 2, chi2 / 2)


def cusum(bits, reverse=False):
    x = _pm(bits)
    if reverse:
        x = x[::-1]
    n = len(x)
    s, z = 0, 0
    for v in x:
        s += v
        z = max(z, abs(s))
    z = mp.mpf(z)
    sq = mp.sqrt(n)
    total = mp.mpf(1)
    for k in range(int((-n / z + 1) / 4), int((n / z - 1) / 4) + 1):  # C int truncation
        total -= mp.ncdf((4 * k + 1) * z / sq) - mp.ncdf((4 * k - 1) * z / sq)
    for k in range(int((-n / z - 3) / 4), int((n / z - 1) / 4) + 1):
        total += mp.ncdf((4 * k + 3) * z / sq) - mp.ncdf((4 * k + 1) * z / sq)
    return total


def runs(bits):
    n = len(bits)
    pi = mp.mpf(sum(int(b) for b in bits)) / n
    v = 1 + sum(1 for i in range(n - 1) if bits[i] != bits[i + 1])
    return mp.erfc(abs(v - 2 * n * pi * (1 - pi)) / (2 * mp.sqrt(2 * n) * pi * (1 - pi)))


def longest_run_probs_bruteforce(m, low, high):
    """Exact category probabilities by enumerating all 2**m blocks."""
    counts = [0] * (high - low + 1)
    for block in itertools.product((0, 1), repeat=m):
        best = cur = 0
        for b in block:
            cur = cur + 1 if b else 0
            best = max(best, cur)
        counts[min(max(best, low), high) - low] += 1
    return [mp.mpf(c) / 2**m for c in counts]


def rank_probability(r, m, q):
    p = mp.mpf(2) ** (r * (q + m - r) - m * q)
    for i in range(r):
        p *= (1 - mp.mpf(2) ** (i - q)) * (1 - mp.mpf(2) ** (i - m)) / (1 - mp.mpf(2) ** (i - r))
    return p


def gf2_rank_bruteforce(matrix):
    rows = [list(r) for r in matrix]
    rank, ncols = 0, len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][c]:
                rows[i] = [a ^ b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def dft_power_of_two(bits):
    """Spectral test on the longest power-of-two prefix, with a direct O(n^2) DFT."""
    n = 1 << (len(bits).bit_length() - 1)
    x = _pm(bits[:n])
    T = mp.sqrt(mp.log(20) * n)
    n1 = 0
    for k in range(n // 2):
        acc = mp.mpc(0)
        for t in range(n):
            acc += x[t] * mp.expj(-2 * mp.pi * k * t / n)
        n1 += abs(acc) < T
    n0 = mp.mpf("0.95") * n / 2
    d = (n1 - n0) / mp.sqrt(n * mp.mpf("0.95") * mp.mpf("0.05") / 4)
    return mp.erfc(abs(d) / mp.sqrt(2))


def _counts(bits, m):
    n = len(bits)
    ext = list(bits) + list(bits[: m - 1])
    c = {}
    for i in range(n):
        key = tuple(ext[i : i + m])
        c[key] = c.get(key, 0) + 1
    return c


def approximate_entropy(bits, m):
    n = len(bits)

    def phi(mm):
        if mm == 0:
            return mp.mpf(0)
        return sum((mp.mpf(v) / n) * mp.log(mp.mpf(v) / n) for v in _counts(bits, mm).values())

    apen = phi(m) - phi(m + 1)
    chi2 = 2 * n * (mp.log(2) - apen)
    return igamc(mp.mpf(2) ** (m - 1), chi2 / 2)


def serial(bits, m):
    n = len(bits)

    def psi2(mm):
        if mm <= 0:
            return mp.mpf(0)
        return mp.mpf(2) ** mm / n * sum(v * v for v in _counts(bits, mm).values()) - n

    p0, p1, p2 = psi2(m), psi2(m - 1), psi2(m - 2)
    d1, d2 = p0 - p1, p0 - 2 * p1 + p2
    return igamc(mp.mpf(2) ** (m - 2), d1 / 2), igamc(mp.mpf(2) ** (m - 3), d2 / 2)
