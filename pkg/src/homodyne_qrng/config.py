"""Run configuration and its TOML file schema.

Every physical quantity carries its unit in the key name. Sections and keys::

    seed = 20180401                      # master seed, unsigned 64-bit

    [detector]
    lo_power_mw = 5.6
    responsivity_a_per_w = 0.8
    eta_pd = 0.64
    tia_gain_v_per_a = 10000
    clearance_db = 10.0                  # sets sigma_en; or give sigma_en_mv
    f3db_mhz = 160
    cmrr_db = 28
    sample_rate_msps = 200

    [characterize]
    trace_samples = 1000000
    sweep_min_mw = 0.63
    sweep_max_mw = 6.3
    sweep_points = 8
    analyzer_rate_gsps = 5.0
    analyzer_samples = 16777216
    psd_segment = 8192
    plateau_bins = 8
    smooth_bins = 15
    pulsed_lo_power_uw = 18
    pulsed_rep_rate_mhz = 50
    cmrr_samples = 1048576
    autocorr_lags = 8

    [binning]
    n_bits = 8
    full_scale_sigma = 5.0               # multiples of sigma_O; or full_scale_mv

    [extractor]
    samples_per_block = 1000
    epsilon_log2 = -50
    seed_policy = "prng"                 # or "system"

    [tests]
    names = ["frequency", "block_frequency", ...]
    block_bits = 1000000
    alpha = 0.01
    threshold = 0.98
    run_after_generate = true

    [generate]
    calibration_samples = 1000000
    entropy_floor_bits = 1.0
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .detector import ConfigError, DetectorConfig, sigma_en_for_clearance
from .stat_suite import ALPHA, TESTS, THRESHOLD

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_ENV = "HOMODYNE_QRNG_CONFIG"


@dataclass
class CharacterizeSettings:
    trace_samples: int = 1_000_000
    sweep_min_mw: float = 0.63
    sweep_max_mw: float = 6.3
    sweep_points: int = 8
    analyzer_rate_gsps: float = 5.0
    analyzer_samples: int = 1 << 24
    psd_segment: int = 8192
    plateau_bins: int = 8
    smooth_bins: int = 15
    pulsed_lo_power_uw: float = 18.0
    pulsed_rep_rate_mhz: float = 50.0
    cmrr_samples: int = 1 << 20
    autocorr_lags: int = 8


@dataclass
class BinningSettings:
    n_bits: int = 8
    full_scale_sigma: float | None = 5.0
    full_scale_mv: float | None = None

    def full_scale(self, sigma_o: float) -> float:
        if self.full_scale_mv is not None:
            return self.full_scale_mv * 1e-3
        return self.full_scale_sigma * sigma_o


@dataclass
class ExtractorSettings:
    samples_per_block: int = 1000
    epsilon_log2: float = -50.0
    seed_policy: str = "prng"

    @property
    def epsilon(self) -> float:
        return 2.0**self.epsilon_log2


@dataclass
class TestSettings:
    __test__ = False

    names: list[str] = field(default_factory=lambda: list(TESTS))
    block_bits: int = 1_000_000
    alpha: float = ALPHA
    threshold: float = THRESHOLD
    run_after_generate: bool = True


@dataclass
class GenerateSettings:
    calibration_samples: int = 1_000_000
    entropy_floor_bits: float = 1.0


@dataclass
class RunConfig:
    detector: DetectorConfig = field(default_factory=lambda: detector_from_file_units({}))
    characterize: CharacterizeSettings = field(default_factory=CharacterizeSettings)
    binning: BinningSettings = field(default_factory=BinningSettings)
    extractor: ExtractorSettings = field(default_factory=ExtractorSettings)
    tests: TestSettings = field(default_factory=TestSettings)
    generate: GenerateSettings = field(default_factory=GenerateSettings)
    seed: int = 20180401

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detector"] = detector_to_file_units(self.detector)
        return d


_DETECTOR_KEYS = {
    "lo_power_mw": ("lo_power", 1e-3),
    "responsivity_a_per_w": ("responsivity", 1.0),
    "eta_pd": ("eta_pd", 1.0),
    "tia_gain_v_per_a": ("tia_gain", 1.0),
    "sigma_en_mv": ("sigma_en", 1e-3),
    "f3db_mhz": ("f3db", 1e6),
    "cmrr_db": ("cmrr_db", 1.0),
    "sample_rate_msps": ("sample_rate", 1e6),
    "lo_rep_rate_mhz": ("lo_rep_rate", 1e6),
}


def detector_from_file_units(section: dict) -> DetectorConfig:
    section = dict(section)
    clearance = section.pop("clearance_db", None)
    kwargs = {}
    for key, value in section.items():
        if key not in _DETECTOR_KEYS:
            raise ConfigError(f"unknown detector key {key!r}")
        name, scale = _DETECTOR_KEYS[key]
        kwargs[name] = None if value is None else float(value) * scale
    if clearance is not None and "sigma_en" in kwargs:
        raise ConfigError("give either clearance_db or sigma_en_mv, not both")
    config = DetectorConfig(**kwargs)
    if clearance is None and "sigma_en" not in kwargs:
        clearance = 10.0
    if clearance is not None:
        config = config.with_(sigma_en=sigma_en_for_clearance(config, float(clearance)))
    return config


def detector_to_file_units(config: DetectorConfig) -> dict:
    out = {}
    for key, (name, scale) in _DETECTOR_KEYS.items():
        value = getattr(config, name)
        out[key] = None if value is None else value / scale
    return out


def _section(cls, data: dict, name: str):
    known = set(cls.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    known = {"seed", "detector", "characterize", "binning", "extractor", "tests", "generate"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    cfg = RunConfig(
        detector=detector_from_file_units(data.get("detector", {})),
        characterize=_section(CharacterizeSettings, data.get("characterize", {}), "characterize"),
        binning=_section(BinningSettings, data.get("binning", {}), "binning"),
        extractor=_section(ExtractorSettings, data.get("extractor", {}), "extractor"),
        tests=_section(TestSettings, data.get("tests", {}), "tests"),
        generate=_section(GenerateSettings, data.get("generate", {}), "generate"),
        seed=int(data.get("seed", RunConfig.seed)),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if not 0 <= cfg.seed < 1 << 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    unknown = [t for t in cfg.tests.names if t not in TESTS]
    if unknown:
        raise ConfigError(f"unknown tests {unknown}")
    if cfg.extractor.seed_policy not in ("prng", "system"):
        raise ConfigError("seed_policy must be 'prng' or 'system'")
    if cfg.binning.full_scale_mv is None and not (cfg.binning.full_scale_sigma or 0) > 0:
        raise ConfigError("binning needs full_scale_sigma > 0 or full_scale_mv")
    if not 1 <= cfg.binning.n_bits <= 16:
        raise ConfigError("n_bits must lie in [1, 16]")
    if cfg.extractor.samples_per_block < 1:
        raise ConfigError("samples_per_block must be >= 1")


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Read a TOML run file; ``None`` falls back to $HOMODYNE_QRNG_CONFIG, then defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def write_example(path: str | os.PathLike) -> Path:
    """Write the default configuration as a TOML file."""
    cfg = RunConfig()
    lines = [f"seed = {cfg.seed}", ""]
    d = cfg.to_dict()
    d["detector"].pop("sigma_en_mv")
    d["detector"]["clearance_db"] = 10.0
    for section in ("detector", "characterize", "binning", "extractor", "tests", "generate"):
        lines.append(f"[{section}]")
        for key, value in d[section].items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    path = Path(path)
    path.write_text("\n".join(lines))
    return path


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(value)
