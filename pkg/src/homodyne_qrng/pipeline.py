"""End-to-end runs: characterization, generation, testing and benchmarking.

Seed derivation: every stage draws from ``rng.child(master, *path)`` with the
string path components mapped through CRC-32. The paths used here are

    ("characterize", "stats" | "sweep" | "cmrr" | "bandwidth" | "autocorr")
    ("generate", "calibration" | "acquisition")
    ("bench",)

and the Toeplitz seed comes from ``rng.child(master, "toeplitz-seed")``. Runs
with the same configuration and master seed are byte-for-byte reproducible
unless the Toeplitz seed policy is ``"system"``.
"""

from __future__ import annotations

import hashlib
import math
import platform
import time
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Iterator

import numpy as np

from . import rng
from .config import RunConfig
from .detector import (
    DetectorConfig,
    NegativeShotNoiseError,
    TraceStats,
    expected_stats,
    iter_trace,
    loglog_fit,
    measure_stats,
    synthesize_trace,
    total_efficiency,
    variance_vs_power,
)
from .quantizer import BinningConfig, codes_to_bits, min_entropy, quantize, unpack_bits
from .spectral import MeasurementError, autocorrelation, bandwidth_3db, cmrr_measure, psd_estimate
from .stat_suite import SuiteReport, battery
from .toeplitz import BATCH_THRESHOLD, ExtractorParams, ToeplitzSeed, extract_naive, extract_packed, seed_generate

SCHEMA = "homodyne-qrng/run-report/1"
SLOPE_RANGE = (0.98, 1.04)
BATCH_BLOCKS = 4096


class EntropyFloorError(RuntimeError):
    """Estimated min-entropy per sample fell below the configured floor."""


def versions() -> dict[str, str]:
    import numba
    import scipy

    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "homodyne_qrng": own,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _stats_dict(stats: TraceStats, eta_pd: float) -> dict:
    return {
        "var_o_v2": stats.var_o,
        "var_en_v2": stats.var_en,
        "var_sn_v2": stats.var_sn,
        "clearance_db": stats.clearance_db,
        "efficiency": {
            "eta_pd": eta_pd,
            "eta_snr": stats.eta_snr,
            "eta": total_efficiency(eta_pd, stats.eta_snr),
        },
    }


def _base_report(config: RunConfig, command: str) -> dict:
    return {"schema": SCHEMA, "command": command, "config": config.to_dict(), "versions": versions()}


# characterization


def measure_cmrr(detector: DetectorConfig, settings, seed) -> float:
    """Pulsed-LO tone height, single diode over balanced."""
    pulsed = detector.with_(
        lo_power=settings.pulsed_lo_power_uw * 1e-6,
        lo_rep_rate=settings.pulsed_rep_rate_mhz * 1e6,
        sample_rate=settings.analyzer_rate_gsps * 1e9,
    )
    fs = pulsed.sample_rate
    psd = {
        mode: psd_estimate(synthesize_trace(pulsed, settings.cmrr_samples, seed, mode), fs, settings.psd_segment)
        for mode in ("balanced", "single_diode")
    }
    return cmrr_measure(psd["balanced"], psd["single_diode"], pulsed.lo_rep_rate)


def measure_bandwidth(detector: DetectorConfig, settings, seed) -> float:
    """-3 dB point of the dark-subtracted CW spectrum at the analyzer rate."""
    cw = detector.with_(lo_rep_rate=None, sample_rate=settings.analyzer_rate_gsps * 1e9)
    fs = cw.sample_rate
    n = settings.analyzer_samples
    lit = psd_estimate(synthesize_trace(cw, n, seed, "balanced"), fs, settings.psd_segment)
    dark = psd_estimate(synthesize_trace(cw, n, seed, "dark"), fs, settings.psd_segment)
    return bandwidth_3db(lit, dark, settings.plateau_bins, settings.smooth_bins)


def cmd_characterize(config: RunConfig) -> dict:
    """Detector figures of merit; ``report["passed"]`` is False on any failed check."""
    det, cs, seed = config.detector, config.characterize, config.seed
    report = _base_report(config, "characterize")
    checks: dict[str, bool] = {}
    errors: dict[str, str] = {}

    try:
        stats = measure_stats(det, cs.trace_samples, rng.child(seed, "characterize", "stats"))
        report["trace_stats"] = _stats_dict(stats, det.eta_pd)
        checks["shot_noise_positive"] = True
    except NegativeShotNoiseError as exc:
        errors["trace_stats"] = str(exc)
        checks["shot_noise_positive"] = False

    if det.lo_power > 0:
        try:
            powers = np.geomspace(cs.sweep_min_mw, cs.sweep_max_mw, cs.sweep_points) * 1e-3
            sweep = variance_vs_power(det, powers, cs.trace_samples, rng.child(seed, "characterize", "sweep"))
            fit = loglog_fit([(p.power, p.var_sn) for p in sweep])
            report["linearity"] = {
                "powers_mw": [p.power * 1e3 for p in sweep],
                "var_o_v2": [p.var_o for p in sweep],
                "var_sn_v2": [p.var_sn for p in sweep],
                "slope": fit.slope,
                "slope_stderr": fit.stderr_slope,
                "intercept": fit.intercept,
            }
            checks["linearity_slope"] = SLOPE_RANGE[0] <= fit.slope <= SLOPE_RANGE[1]
        except (NegativeShotNoiseError, ValueError) as exc:
            errors["linearity"] = str(exc)
            checks["linearity_slope"] = False

    for name, fn, key, scale in (
        ("cmrr", measure_cmrr, "cmrr_db", 1.0),
        ("bandwidth", measure_bandwidth, "bandwidth_mhz", 1e-6),
    ):
        try:
            report[key] = fn(det, cs, rng.child(seed, "characterize", name)) * scale
            checks[name] = bool(np.isfinite(report[key]))
        except MeasurementError as exc:
            errors[name] = str(exc)
            checks[name] = False

    if det.lo_power > 0 and cs.autocorr_lags > 0:
        trace = synthesize_trace(det, cs.trace_samples, rng.child(seed, "characterize", "autocorr"))
        report["autocorrelation"] = autocorrelation(trace, cs.autocorr_lags).tolist()

    report["checks"] = checks
    if errors:
        report["errors"] = errors
    report["passed"] = all(checks.values())
    return report


# generation


@dataclass(frozen=True)
class SourceModel:
    stats: TraceStats
    binning: BinningConfig
    h_inf: float
    max_bin_probability: float
    params: ExtractorParams


def calibrate(config: RunConfig) -> SourceModel:
    """Measure the trace variances, fix the ADC range and size the extractor."""
    stats = measure_stats(config.detector, config.generate.calibration_samples, rng.child(config.seed, "generate", "calibration"))
    binning = BinningConfig(config.binning.n_bits, config.binning.full_scale(math.sqrt(stats.var_o)))
    entropy = min_entropy(math.sqrt(stats.var_sn), binning)
    h = entropy.min_entropy_bits
    floor = config.generate.entropy_floor_bits
    if h < floor:
        raise EntropyFloorError(
            f"min-entropy {h:.4f} bits/sample is below the floor of {floor} "
            f"(clearance {stats.clearance_db:.2f} dB, full scale {binning.full_scale:.4g} V)"
        )
    ex = config.extractor
    params = ExtractorParams.for_source(ex.samples_per_block, binning.n_bits, h, ex.epsilon)
    return SourceModel(stats, binning, h, entropy.max_bin_probability, params)


def toeplitz_seed(config: RunConfig, params: ExtractorParams) -> ToeplitzSeed:
    return seed_generate(params.seed_length, config.extractor.seed_policy, config.seed)


def raw_code_batches(
    detector: DetectorConfig, seed, binning: BinningConfig, samples_per_block: int, n_blocks: int, batch: int = BATCH_BLOCKS
) -> Iterator[np.ndarray]:
    """ADC codes of the acquisition trace, shaped ``(blocks, samples_per_block)``."""
    trace = iter_trace(detector, seed, "balanced")
    buf = np.empty(0)
    remaining = n_blocks
    while remaining > 0:
        take = min(batch, remaining)
        need = take * samples_per_block
        parts = [buf]
        have = len(buf)
        while have < need:
            parts.append(next(trace))
            have += len(parts[-1])
        buf = np.concatenate(parts)
        yield quantize(buf[:need], binning).reshape(take, samples_per_block)
        buf = buf[need:]
        remaining -= take


def pack_codes(codes: np.ndarray, n_bits: int) -> np.ndarray:
    """MSB-first packed rows, one row per block."""
    if n_bits == 8:
        return np.ascontiguousarray(codes, dtype=np.uint8)
    bits = codes_to_bits(codes.ravel(), n_bits).reshape(len(codes), -1)
    return np.packbits(bits, axis=1)


class _BitSink:
    """Writes a 0/1 stream as packed bytes, padding only the final byte."""

    def __init__(self, fh, limit: int | None = None):
        self.fh = fh
        self.limit = limit
        self.carry = np.empty(0, dtype=np.uint8)
        self.bits = 0
        self.digest = hashlib.sha256()

    def write(self, bits: np.ndarray) -> None:
        bits = bits.ravel()
        if self.limit is not None:
            bits = bits[: self.limit - self.bits]
        self.bits += len(bits)
        allbits = np.concatenate((self.carry, bits))
        full = len(allbits) // 8 * 8
        self.write_bytes(np.packbits(allbits[:full]).tobytes())
        self.carry = allbits[full:]

    def close(self) -> None:
        if len(self.carry):
            self.write_bytes(np.packbits(self.carry).tobytes())
            self.carry = self.carry[:0]

    def write_bytes(self, data: bytes) -> None:
        self.digest.update(data)
        if self.fh is not None:
            self.fh.write(data)


def cmd_generate(config: RunConfig, n_output_bits: int, out: str | Path, raw_out: str | Path | None = None) -> dict:
    """Write ``n_output_bits`` extracted bits to ``out`` and return the run report.

    The battery runs on the written file when ``config.tests.run_after_generate``
    is set and at least one block fits.
    """
    model = calibrate(config)
    params = model.params
    if n_output_bits < params.m_out:
        raise ValueError(f"n_output_bits must be >= m_out = {params.m_out}")
    seed = toeplitz_seed(config, params)
    spb = config.extractor.samples_per_block
    n_bits = model.binning.n_bits
    n_blocks = -(-n_output_bits // params.m_out)

    out = Path(out)
    hist = np.zeros(model.binning.n_codes, dtype=np.int64)
    raw_fh = open(raw_out, "wb") if raw_out is not None else None
    try:
        with open(out, "wb") as fh:
            sink = _BitSink(fh, n_output_bits)
            raw_sink = _BitSink(raw_fh) if raw_fh else None
            batches = raw_code_batches(
                config.detector, rng.child(config.seed, "generate", "acquisition"), model.binning, spb, n_blocks
            )
            for codes in batches:
                hist += np.bincount(codes.ravel(), minlength=model.binning.n_codes)
                xb = pack_codes(codes, n_bits)
                if raw_sink:
                    raw_sink.write_bytes(xb.tobytes())
                sink.write(extract_packed(xb, seed, params))
            sink.close()
    finally:
        if raw_fh:
            raw_fh.close()

    emp_h = float(-np.log2(hist.max() / hist.sum()))
    fs = config.detector.sample_rate
    raw_bits = n_blocks * params.n_in
    report = _base_report(config, "generate")
    report["trace_stats"] = _stats_dict(model.stats, config.detector.eta_pd)
    report["entropy"] = {
        "n_bits": n_bits,
        "full_scale_v": model.binning.full_scale,
        "sigma_o_v": math.sqrt(model.stats.var_o),
        "sigma_sn_v": math.sqrt(model.stats.var_sn),
        "min_entropy_bits": model.h_inf,
        "max_bin_probability": model.max_bin_probability,
        "empirical_raw_min_entropy_bits": emp_h,
    }
    report["extraction"] = {
        "n_in": params.n_in,
        "m_out": params.m_out,
        "epsilon": params.epsilon,
        "samples_per_block": spb,
        "blocks": n_blocks,
        "raw_bits": raw_bits,
        "output_bits": n_output_bits,
        "ratio": params.m_out / params.n_in,
        "seed_length": params.seed_length,
        "seed_provenance": seed.provenance,
        "seed_hex": seed.to_hex(),
        "seed_reuse": "one seed for all blocks",
    }
    report["rates"] = {
        "sample_rate_msps": fs / 1e6,
        "information_rate_gbps": fs * model.h_inf / 1e9,
        "extracted_rate_gbps": fs * params.m_out / spb / 1e9,
    }
    report["output"] = {"file": out.name, "bytes": -(-n_output_bits // 8), "sha256": sink.digest.hexdigest()}
    if raw_out is not None:
        report["raw_output"] = {"file": Path(raw_out).name, "bytes": raw_bits // 8, "sha256": raw_sink.digest.hexdigest()}

    passed = True
    if config.tests.run_after_generate and n_output_bits >= config.tests.block_bits:
        suite = cmd_test(config, out)
        report["suite"] = suite.to_dict()
        passed = suite.passed
    report["passed"] = passed
    return report


def cmd_test(config: RunConfig, path: str | Path, blocks: int | None = None) -> SuiteReport:
    """Battery over consecutive ``block_bits`` blocks of a packed bit file."""
    t = config.tests
    data = Path(path).read_bytes()
    if len(data) * 8 < t.block_bits:
        raise ValueError(f"{path}: {len(data) * 8} bits is shorter than one {t.block_bits}-bit block")
    if blocks is not None and len(data) * 8 < blocks * t.block_bits:
        raise ValueError(f"{path}: {len(data) * 8} bits cannot fill {blocks} blocks of {t.block_bits}")
    bits = unpack_bits(data)
    return battery(bits, t.block_bits, t.names, t.alpha, t.threshold, max_blocks=blocks)


# benchmark


def _timed(fn, min_seconds: float) -> tuple[int, float]:
    """Repeat ``fn`` until ``min_seconds`` pass; return (calls, seconds)."""
    calls, start = 0, time.perf_counter()
    while True:
        fn()
        calls += 1
        elapsed = time.perf_counter() - start
        if elapsed >= min_seconds:
            return calls, elapsed


def cmd_bench(config: RunConfig, duration: float = 2.0, batch_blocks: int = BATCH_BLOCKS, naive_blocks: int = 4) -> dict:
    """Extractor and pipeline software throughput; ``duration <= 0`` returns ``{}``.

    The duration is split evenly over the timed sections.
    """
    if duration <= 0:
        return {}
    share = duration / 4
    ex = config.extractor
    sigma = math.sqrt(expected_stats(config.detector).var_sn)
    sigma_o = math.sqrt(expected_stats(config.detector).var_o)
    binning = BinningConfig(config.binning.n_bits, config.binning.full_scale(sigma_o))
    h = min_entropy(sigma, binning).min_entropy_bits
    params = ExtractorParams.for_source(ex.samples_per_block, binning.n_bits, h, ex.epsilon)
    seed = seed_generate(params.seed_length, "prng", config.seed)
    gen = rng.generator(rng.child(config.seed, "bench"))
    row = -(-params.n_in // 8)
    xb = gen.integers(0, 256, (batch_blocks, row), dtype=np.uint8)
    if params.n_in % 8:
        xb[:, -1] &= np.uint8((0xFF << (8 - params.n_in % 8)) & 0xFF)
    bits = np.unpackbits(xb, axis=1)[:, : params.n_in]

    extract_packed(xb[:1], seed, params)  # compile both kernels before timing
    extract_packed(xb[:BATCH_THRESHOLD], seed, params)

    naive_out = np.array([extract_naive(b, seed, params) for b in bits[:naive_blocks]])
    blocked_out = extract_packed(xb[:naive_blocks], seed, params)
    identical = bool(np.array_equal(naive_out, blocked_out))

    calls, secs = _timed(lambda: [extract_naive(b, seed, params) for b in bits[:naive_blocks]], share)
    naive_per_block = secs / (calls * naive_blocks)
    calls, secs = _timed(lambda: extract_packed(xb[:1], seed, params), share / 2)
    single_per_block = secs / calls
    calls, secs = _timed(lambda: extract_packed(xb, seed, params), share)
    batch_per_block = secs / (calls * batch_blocks)

    # full pipeline: synthesis, quantization, packing and extraction
    n_blocks = batch_blocks
    def pipeline_once():
        src = raw_code_batches(config.detector, rng.child(config.seed, "bench", "pipeline"), binning, ex.samples_per_block, n_blocks, batch_blocks)
        for codes in src:
            extract_packed(pack_codes(codes, binning.n_bits), seed, params)

    calls, secs = _timed(pipeline_once, share)
    pipe_blocks_per_s = calls * n_blocks / secs

    return {
        "n_in": params.n_in,
        "m_out": params.m_out,
        "batch_blocks": batch_blocks,
        "naive_matches_blocked": identical,
        "naive": {"seconds_per_block": naive_per_block, "gbps_in": params.n_in / naive_per_block / 1e9},
        "blocked_single": {
            "seconds_per_block": single_per_block,
            "gbps_in": params.n_in / single_per_block / 1e9,
            "speedup_vs_naive": naive_per_block / single_per_block,
        },
        "blocked_batch": {
            "seconds_per_block": batch_per_block,
            "gbps_in": params.n_in / batch_per_block / 1e9,
            "gbps_out": params.m_out / batch_per_block / 1e9,
            "speedup_vs_naive": naive_per_block / batch_per_block,
        },
        "pipeline": {
            "samples_per_second": pipe_blocks_per_s * ex.samples_per_block,
            "gbps_out": pipe_blocks_per_s * params.m_out / 1e9,
        },
        "information_rate_gbps": config.detector.sample_rate * h / 1e9,
        "note": "software throughput on this machine; the information rate is sample_rate x min-entropy",
    }



# rendering


def _fmt(value, spec: str = ".4g") -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return format(value, spec)
    return str(value)


def render_report(report: dict) -> str:
    """Human-readable summary of a run, test or bench report."""
    lines = []
    if not report:
        return "empty report"
    cmd = report.get("command", "bench" if "blocked_batch" in report else "test")
    lines.append(f"== {cmd} ==")
    ts = report.get("trace_stats")
    if ts:
        eff = ts["efficiency"]
        lines.append(
            f"clearance {ts['clearance_db']:.3f} dB | var_O {ts['var_o_v2']:.4g} V^2 | var_EN {ts['var_en_v2']:.4g} V^2"
        )
        lines.append(f"eta_pd {eff['eta_pd']:.4f} | eta_SNR {eff['eta_snr']:.4f} | eta {eff['eta']:.4f}")
    if "linearity" in report:
        lin = report["linearity"]
        lines.append(f"shot-noise slope {lin['slope']:.4f} +/- {_fmt(lin['slope_stderr'], '.2g')}")
    if "cmrr_db" in report:
        lines.append(f"CMRR {report['cmrr_db']:.2f} dB")
    if "bandwidth_mhz" in report:
        lines.append(f"bandwidth {report['bandwidth_mhz']:.2f} MHz")
    if "autocorrelation" in report:
        lines.append("autocorrelation " + " ".join(f"{r:+.3f}" for r in report["autocorrelation"][1:]))
    if "entropy" in report:
        en = report["entropy"]
        lines.append(
            f"min-entropy {en['min_entropy_bits']:.5f} bits/sample ({en['n_bits']}-bit ADC, "
            f"full scale {en['full_scale_v']:.4g} V); raw empirical {_fmt(en['empirical_raw_min_entropy_bits'], '.4f')}"
        )
    if "extraction" in report:
        ex = report["extraction"]
        lines.append(
            f"extractor {ex['n_in']} -> {ex['m_out']} bits (ratio {ex['ratio']:.4f}, eps 2^{math.log2(ex['epsilon']):.0f}); "
            f"{ex['blocks']} blocks, {ex['raw_bits']} raw bits -> {ex['output_bits']} output bits"
        )
    if "rates" in report:
        r = report["rates"]
        lines.append(
            f"information rate {r['information_rate_gbps']:.4f} Gbps, extracted {r['extracted_rate_gbps']:.4f} Gbps "
            f"at {r['sample_rate_msps']:.0f} MS/s"
        )
    if "output" in report:
        o = report["output"]
        lines.append(f"wrote {o['bytes']} bytes to {o['file']} (sha256 {o['sha256'][:16]}...)")
    suite = report.get("suite") if "suite" in report else (report if "success_rates" in report else None)
    if suite:
        lines.append(
            f"battery: {suite['block_count']} blocks of {suite['bits_per_block']} bits, "
            f"alpha {suite['alpha']}, threshold {suite['threshold']}"
        )
        for name, rate in suite["success_rates"].items():
            mark = "PASS" if rate >= suite["threshold"] else "FAIL"
            lines.append(f"  {name:<24} {rate:.3f}  uniformity p {suite['uniformity_p'][name]:.4f}  {mark}")
        for name, why in suite.get("skipped", {}).items():
            lines.append(f"  {name:<24} skipped: {why}")
        for name in suite.get("external", {}):
            lines.append(f"  {name:<24} external/skipped")
    if "blocked_batch" in report:
        b = report
        lines.append(f"extractor n={b['n_in']} m={b['m_out']}; naive == blocked: {b['naive_matches_blocked']}")
        lines.append(f"  naive          {b['naive']['gbps_in']:.5f} Gbps in")
        lines.append(
            f"  blocked single {b['blocked_single']['gbps_in']:.4f} Gbps in ({b['blocked_single']['speedup_vs_naive']:.1f}x naive)"
        )
        lines.append(
            f"  blocked batch  {b['blocked_batch']['gbps_in']:.4f} Gbps in, {b['blocked_batch']['gbps_out']:.4f} Gbps out "
            f"({b['blocked_batch']['speedup_vs_naive']:.1f}x naive, {b['batch_blocks']} blocks)"
        )
        lines.append(
            f"  pipeline       {b['pipeline']['samples_per_second'] / 1e6:.2f} MS/s, {b['pipeline']['gbps_out']:.4f} Gbps out"
        )
        lines.append(f"  information rate {b['information_rate_gbps']:.4f} Gbps (not a software throughput)")
    for name, msg in report.get("errors", {}).items():
        lines.append(f"error in {name}: {msg}")
    if "checks" in report:
        for name, ok in report["checks"].items():
            lines.append(f"check {name}: {'pass' if ok else 'FAIL'}")
    if "passed" in report:
        lines.append("PASS" if report["passed"] else "FAIL")
    return "\n".join(lines)
