"""Min-entropy per sample and information rate across clearance and ADC range.

Scans the electronic-noise clearance and the full-scale range in units of
sigma_O, printing analytic H_min, the extractor output length per 1000-sample
block and the resulting rates at 200 MS/s. The default operating point is
marked with an asterisk.
"""

import argparse
import math

from homodyne_qrng.detector import expected_stats, operating_point
from homodyne_qrng.quantizer import BinningConfig, min_entropy
from homodyne_qrng.toeplitz import output_length


def row(clearance: float, full_scale_sigma: float, n_bits: int):
    det = operating_point(clearance=clearance)
    s = expected_stats(det)
    binning = BinningConfig(n_bits, full_scale_sigma * math.sqrt(s.var_o))
    h = min_entropy(math.sqrt(s.var_sn), binning).min_entropy_bits
    m = output_length(1000, h)
    return h, m, det.sample_rate * h / 1e9, det.sample_rate * m / 1000 / 1e9


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bits", type=int, default=8)
    args = ap.parse_args()

    print(f"{'clear (dB)':>10} {'FS/sigma_O':>10} {'H_min':>8} {'m_out':>6} {'info Gbps':>10} {'out Gbps':>9}")
    for clearance in (3.0, 6.0, 10.0, 15.0, 20.0):
        for fs in (3.0, 4.0, 5.0, 6.0):
            h, m, info, out = row(clearance, fs, args.bits)
            mark = "*" if clearance == 10.0 and fs == 5.0 else " "
            print(f"{clearance:10.1f} {fs:10.1f} {h:8.4f} {m:6d} {info:10.4f} {out:9.4f}{mark}")


if __name__ == "__main__":
    main()
