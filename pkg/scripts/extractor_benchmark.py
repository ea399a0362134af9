"""Toeplitz extractor throughput: naive matrix product against the packed kernels.

Sweeps the block size at the operating-point compression ratio and reports
input and output Gbps for the naive, single-block and batched paths.
"""

import argparse
import time

import numpy as np

from homodyne_qrng.toeplitz import ExtractorParams, extract_blocked, extract_naive, extract_packed, seed_generate

RATIO = 5828 / 8000


def timed(fn, budget: float) -> float:
    fn()
    calls, start = 0, time.perf_counter()
    while time.perf_counter() - start < budget:
        fn()
        calls += 1
    return (time.perf_counter() - start) / max(calls, 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budget", type=float, default=0.5, help="seconds per measurement")
    ap.add_argument("--batch", type=int, default=4096)
    args = ap.parse_args()

    g = np.random.default_rng(0)
    print(f"{'n_in':>6} {'m_out':>6} {'naive Gbps':>11} {'single Gbps':>12} {'batch Gbps':>11} {'batch/naive':>12}")
    for n in (1000, 2000, 4000, 8000, 16000):
        m = int(n * RATIO)
        p = ExtractorParams(n, m)
        seed = seed_generate(p.seed_length, "prng", 1)
        x = g.integers(0, 2, n).astype(np.uint8)
        xb = np.packbits(g.integers(0, 2, (args.batch, n)).astype(np.uint8), axis=1)
        t_naive = timed(lambda: extract_naive(x, seed, p), args.budget)
        t_single = timed(lambda: extract_blocked(x, seed, p), args.budget)
        t_batch = timed(lambda: extract_packed(xb, seed, p), args.budget) / args.batch
        gbps = [n / t / 1e9 for t in (t_naive, t_single, t_batch)]
        print(f"{n:6d} {m:6d} {gbps[0]:11.4f} {gbps[1]:12.4f} {gbps[2]:11.4f} {t_naive / t_batch:11.0f}x")


if __name__ == "__main__":
    main()
