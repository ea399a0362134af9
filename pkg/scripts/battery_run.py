"""Statistical battery over extracted output, scaled down from the full 1000-block run.

Generates ``--blocks`` blocks of 10^6 extracted bits, runs every test in the
battery and prints the success rate and p-value uniformity for each. Pass
``--raw`` to also run the battery on the unextracted ADC codes.
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from homodyne_qrng import pipeline
from homodyne_qrng import stat_suite as S
from homodyne_qrng.config import RunConfig


def show(title: str, rep: S.SuiteReport) -> None:
    print(f"\n{title}: {rep.block_count} blocks of {rep.bits_per_block} bits, threshold {rep.threshold}")
    for name, rate in rep.success_rates.items():
        flag = "ok" if rate >= rep.threshold else "FAIL"
        print(f"  {name:26s} {rate:6.3f}  uniformity p {rep.uniformity[name]:.4f}  {flag}")
    for name in rep.external:
        print(f"  {name:26s} external/skipped")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--blocks", type=int, default=100)
    ap.add_argument("--seed", type=int, default=RunConfig.seed)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--raw", action="store_true")
    args = ap.parse_args()

    cfg = RunConfig(seed=args.seed)
    cfg.tests.run_after_generate = False
    n_bits = args.blocks * cfg.tests.block_bits
    with tempfile.TemporaryDirectory() as d:
        out, raw = Path(d) / "out.bin", Path(d) / "raw.bin"
        t0 = time.perf_counter()
        pipeline.cmd_generate(cfg, n_bits, out, raw_out=raw if args.raw else None)
        print(f"generated {n_bits} bits in {time.perf_counter() - t0:.1f} s")
        bits = np.unpackbits(np.fromfile(out, dtype=np.uint8))
        show("extracted", S.battery(bits, cfg.tests.block_bits, workers=args.workers))
        if args.raw:
            raw_bits = np.unpackbits(np.fromfile(raw, dtype=np.uint8))
            show("raw codes", S.battery(raw_bits, cfg.tests.block_bits, max_blocks=args.blocks, workers=args.workers))


if __name__ == "__main__":
    main()
