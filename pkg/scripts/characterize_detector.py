"""Detector figures of merit: shot-noise linearity sweep, clearance, CMRR, bandwidth.

Prints the variance-vs-power table and the remaining figures, and optionally
writes everything as JSON.

    python scripts/characterize_detector.py [--seed N] [--out results.json]
"""

import argparse
import json

import numpy as np

from homodyne_qrng import pipeline
from homodyne_qrng.config import RunConfig
from homodyne_qrng.detector import loglog_fit, variance_vs_power
from homodyne_qrng import rng


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=RunConfig.seed)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = RunConfig(seed=args.seed)
    cfg.characterize.trace_samples = args.samples
    s = cfg.characterize
    powers = np.geomspace(s.sweep_min_mw, s.sweep_max_mw, s.sweep_points) * 1e-3
    points = variance_vs_power(cfg.detector, powers, args.samples, rng.child(cfg.seed, "characterize", "sweep"))
    fit = loglog_fit([(p.power, p.var_sn) for p in points])

    print(f"{'P_LO (mW)':>10} {'var_O (V^2)':>13} {'var_SN (V^2)':>13}")
    for p in points:
        print(f"{p.power * 1e3:10.3f} {p.var_o:13.4e} {p.var_sn:13.4e}")
    print(f"log-log slope {fit.slope:.4f} +/- {fit.stderr_slope:.4f}")

    report = pipeline.cmd_characterize(cfg)
    print(pipeline.render_report(report))
    if args.out:
        report["sweep"] = [p._asdict() for p in points]
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
