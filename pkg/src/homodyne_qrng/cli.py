"""``qrng`` command line: characterize, generate, test, bench, report.

Exit codes: 0 when every enabled check passes, 1 on a threshold failure,
2 on usage, configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import CONFIG_ENV, RunConfig, load_config, validate, write_example
from .detector import ConfigError, NegativeShotNoiseError
from .toeplitz import BlockTooSmallError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help=f"TOML run file (default: ${CONFIG_ENV}, then built-in defaults)")
    common.add_argument("--seed", type=_u64, metavar="U64", help="override the master seed")
    common.add_argument("--json", action="store_true", help="print the report as JSON")

    parser = argparse.ArgumentParser(prog="qrng", description="Homodyne detector simulator and vacuum-noise QRNG pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", parents=[common], help="detector figures of merit")
    p.add_argument("--out", metavar="PATH", help="write the JSON report here")

    p = sub.add_parser("generate", parents=[common], help="produce extracted random bits")
    p.add_argument("--bits", type=_positive_int, required=True, metavar="N", help="number of output bits")
    p.add_argument("--out", required=True, metavar="PATH", help="packed output file (MSB first, no header)")
    p.add_argument("--report", metavar="PATH", help="sidecar report (default: OUT.report.json)")
    p.add_argument("--raw-out", metavar="PATH", help="also write the unextracted packed ADC codes")
    p.add_argument("--no-test", action="store_true", help="skip the battery after generation")
    p.add_argument("--threshold", type=float, metavar="F", help="battery success-rate threshold")

    p = sub.add_parser("test", parents=[common], help="run the statistical battery on a packed bit file")
    p.add_argument("path", metavar="FILE")
    p.add_argument("--blocks", type=_positive_int, metavar="N", help="number of blocks to test")
    p.add_argument("--block-bits", type=_positive_int, metavar="N", help="bits per block")
    p.add_argument("--threshold", type=float, metavar="F", help="success-rate threshold")
    p.add_argument("--out", metavar="PATH", help="write the JSON report here")

    p = sub.add_parser("bench", parents=[common], help="extractor and pipeline throughput")
    p.add_argument("--duration", type=float, default=2.0, metavar="S", help="total timing budget in seconds")
    p.add_argument("--out", metavar="PATH", help="write the JSON report here")

    p = sub.add_parser("report", parents=[common], help="render a saved report")
    p.add_argument("path", metavar="FILE")

    p = sub.add_parser("init-config", help="write the default TOML run file")
    p.add_argument("path", metavar="FILE")
    return parser


def _config(args) -> RunConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "threshold", None) is not None:
        config.tests.threshold = args.threshold
    if getattr(args, "block_bits", None) is not None:
        config.tests.block_bits = args.block_bits
    if getattr(args, "no_test", False):
        config.tests.run_after_generate = False
    validate(config)
    return config


def _dump(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def _emit(report: dict, args, out: str | None = None) -> None:
    if out:
        Path(out).write_text(_dump(report) + "\n")
    print(_dump(report) if args.json else pipeline.render_report(report))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    try:
        if args.command == "init-config":
            write_example(args.path)
            return EXIT_OK
        if args.command == "report":
            report = json.loads(Path(args.path).read_text())
            print(_dump(report) if args.json else pipeline.render_report(report))
            return EXIT_OK if report.get("passed", True) else EXIT_FAIL

        config = _config(args)
        if args.command == "characterize":
            report = pipeline.cmd_characterize(config)
            _emit(report, args, args.out)
            return EXIT_OK if report["passed"] else EXIT_FAIL
        if args.command == "generate":
            report = pipeline.cmd_generate(config, args.bits, args.out, args.raw_out)
            _emit(report, args, args.report or f"{args.out}.report.json")
            return EXIT_OK if report["passed"] else EXIT_FAIL
        if args.command == "test":
            suite = pipeline.cmd_test(config, args.path, args.blocks)
            report = suite.to_dict()
            _emit(report, args, args.out)
            return EXIT_OK if suite.passed else EXIT_FAIL
        if args.command == "bench":
            report = pipeline.cmd_bench(config, args.duration)
            _emit(report, args, args.out)
            return EXIT_OK
    except pipeline.EntropyFloorError as exc:
        print(f"qrng: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NegativeShotNoiseError as exc:
        print(f"qrng: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, BlockTooSmallError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"qrng: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
