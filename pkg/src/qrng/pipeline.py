"""End-to-end orchestration: sweep, simulate, estimate, extract, test.

A single JSON document configures every stage; every intermediate artifact
is persisted so each stage of a run can be audited afterwards. All stages
are deterministic functions of the configuration, so two runs from the
same file produce byte-identical artifacts.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import figures
from .bitstream import BitStream
from .calibration import fit_tunneling_curve, recommend_voltage, run_sweep
from .entropy import min_entropy
from .errors import InvalidArgumentError
from .extractor import (ExtractorParams, compute_output_length,
                        derive_seed_stream, extract_stream)
from .simulator import SourceConfig, TunnelingModel, simulate_pulse_train
from .stattests import (autocorrelation, format_report_table, report_to_dict,
                        run_battery)

# pins the per-pulse firing probability at the default operating point to 1/2
DEFAULT_MODEL = TunnelingModel(A=0.9, B=0.2 * math.log(1.8), V0=49.2)

DEFAULT_SWEEP_VOLTAGES = tuple(round(49.25 + 0.025 * k, 3) for k in range(11))


@dataclass(frozen=True)
class SweepConfig:
    voltages: tuple = DEFAULT_SWEEP_VOLTAGES
    pulses_per_point: int = 200_000


@dataclass(frozen=True)
class ExtractConfig:
    l: int = 3000
    epsilon_log2: int = -100
    h0_mode: str = "log2l"
    security_sign: str = "subtract"
    seed_key: int = 7
    seed_path: str = ""   # when set, read the Toeplitz seed from this file


@dataclass(frozen=True)
class TestsConfig:
    alpha: float = 0.01
    n_subsequences: int = 100
    max_lag: int = 100
    block_len: int = 128
    apen_m: int = 5
    serial_m: int = 5


@dataclass(frozen=True)
class IOConfig:
    out_dir: str = "qrng_out"
    raw_rate_bps: float = 20e6   # collection rate the final rate is quoted against
    export_ascii: bool = False
    headerless: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    source: SourceConfig = field(default_factory=lambda: SourceConfig(
        model=DEFAULT_MODEL, u_high=49.40,
        protect_period=2000, protect_duration=48, rng_seed=42))
    sweep: SweepConfig = field(default_factory=SweepConfig)
    entropy_block_bits: int = 8
    extract: ExtractConfig = field(default_factory=ExtractConfig)
    tests: TestsConfig = field(default_factory=TestsConfig)
    io: IOConfig = field(default_factory=IOConfig)
    n_pulses: int = 20_000_000


def default_config() -> PipelineConfig:
    """Configuration used when no file is given: burst-protected source
    biased to fire on half the pulses."""
    return PipelineConfig()


@dataclass(frozen=True)
class RateReport:
    raw_rate: float
    extraction_ratio: float
    final_rate: float


def make_rate_report(raw_rate_bps: float, l: int, m: int) -> RateReport:
    ratio = m / l
    return RateReport(raw_rate=raw_rate_bps, extraction_ratio=ratio,
                      final_rate=raw_rate_bps * ratio)


# ---- config (de)serialization ----

def config_to_dict(config: PipelineConfig) -> dict:
    src = dataclasses.asdict(config.source)
    return {
        "source": src,
        "sweep": dataclasses.asdict(config.sweep),
        "entropy_block_bits": config.entropy_block_bits,
        "extract": dataclasses.asdict(config.extract),
        "tests": dataclasses.asdict(config.tests),
        "io": dataclasses.asdict(config.io),
        "n_pulses": config.n_pulses,
    }


def _build(cls, data: dict, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgumentError(
            f"unknown {where} config keys: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> PipelineConfig:
    data = dict(data)
    top = {"source", "sweep", "entropy_block_bits", "extract", "tests", "io",
           "n_pulses"}
    unknown = set(data) - top
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")

    defaults = PipelineConfig()
    source = defaults.source
    if "source" in data:
        src = dict(data["source"])
        model = source.model
        if "model" in src:
            model = _build(TunnelingModel, src.pop("model"), "source.model")
        source = _build(SourceConfig, {"model": model, **src}, "source")
    sweep = defaults.sweep
    if "sweep" in data:
        sw = dict(data["sweep"])
        if "voltages" in sw:
            sw["voltages"] = tuple(sw["voltages"])
        sweep = _build(SweepConfig, sw, "sweep")
    extract = _build(ExtractConfig, dict(data["extract"]), "extract") \
        if "extract" in data else defaults.extract
    tests = _build(TestsConfig, dict(data["tests"]), "tests") \
        if "tests" in data else defaults.tests
    io = _build(IOConfig, dict(data["io"]), "io") if "io" in data else defaults.io
    return PipelineConfig(
        source=source, sweep=sweep,
        entropy_block_bits=int(data.get("entropy_block_bits",
                                        defaults.entropy_block_bits)),
        extract=extract, tests=tests, io=io,
        n_pulses=int(data.get("n_pulses", defaults.n_pulses)))


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_csv(points, path) -> None:
    lines = ["voltage,mean,entropy,n_samples"]
    for p in points:
        lines.append(f"{p.voltage!r},{p.mean!r},{p.entropy!r},{p.n_samples}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_fit_reports(fit, json_path, text_path, recommended=None) -> None:
    _write_json({
        "A": fit.model.A,
        "B": fit.model.B,
        "V0": fit.model.V0,
        "r_squared": fit.r_squared,
        "outliers": list(fit.outliers),
    }, Path(json_path))
    lines = [
        f"A         = {fit.model.A!r}",
        f"B         = {fit.model.B!r}",
        f"V0        = {fit.model.V0!r}",
        f"r_squared = {fit.r_squared!r}",
        f"outliers  = {list(fit.outliers)!r}",
        f"residuals = {[round(r, 8) for r in fit.residuals]!r}",
    ]
    if recommended is not None:
        lines.append(f"recommended_voltage = {recommended!r}")
    Path(text_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class PipelineResult:
    artifacts: dict
    fit: object
    recommended_voltage: float
    entropy_report: object
    rate: RateReport
    battery: object
    autocorr: tuple
    discarded_bits: int

    @property
    def passed(self) -> bool:
        return self.battery.passed


def resolve_extractor_params(config: PipelineConfig, h_min: float) -> ExtractorParams:
    ext = config.extract
    m = compute_output_length(ext.l, h_min, config.entropy_block_bits,
                              ext.epsilon_log2, ext.h0_mode, ext.security_sign)
    if ext.seed_path:
        seed = BitStream.from_file(ext.seed_path)
        if len(seed) != ext.l + m - 1:
            raise InvalidArgumentError(
                f"seed file holds {len(seed)} bits, need l+m-1 = {ext.l + m - 1}")
    else:
        seed = derive_seed_stream(ext.seed_key, ext.l, m)
    return ExtractorParams(input_len_l=ext.l, output_len_m=m, h_min=h_min,
                           block_bits=config.entropy_block_bits,
                           epsilon_log2=ext.epsilon_log2, seed=seed)


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage, persist every artifact, and return the reports."""
    out = Path(config.io.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    def art(name):
        artifacts[name] = out / name
        return artifacts[name]

    _write_json(config_to_dict(config), art("config.json"))

    # calibration sweep and curve fit
    points = run_sweep(config.source, config.sweep.voltages,
                       config.sweep.pulses_per_point)
    fit = fit_tunneling_curve(points, reject_outliers=True)
    recommended = recommend_voltage(fit, target_mean=0.5)
    write_sweep_csv(points, art("sweep.csv"))
    write_fit_reports(fit, art("fit.json"), art("fit.txt"), recommended)
    figures.plot_calibration(points, fit, art("calibration_mean.png"), recommended)
    figures.plot_entropy_curve(points, art("calibration_entropy.png"))

    # raw data at the configured operating point
    raw = simulate_pulse_train(config.source, config.n_pulses)
    raw.to_file(art("raw.trng"), headerless=config.io.headerless)
    if config.io.export_ascii:
        raw.to_ascii_file(art("raw.txt"))

    # worst-case entropy and extraction
    entropy_report = min_entropy(raw, config.entropy_block_bits)
    _write_json(entropy_report.to_dict(), art("entropy.json"))
    params = resolve_extractor_params(config, entropy_report.h_min)
    params.seed.to_file(art("seed.trng"))
    extracted = extract_stream(raw, params)
    extracted.to_file(art("extracted.trng"), headerless=config.io.headerless)
    if config.io.export_ascii:
        extracted.to_ascii_file(art("extracted.txt"))
    discarded = len(raw) - (len(raw) // params.input_len_l) * params.input_len_l
    rate = make_rate_report(config.io.raw_rate_bps, params.input_len_l,
                            params.output_len_m)
    _write_json({
        "raw_rate_bps": rate.raw_rate,
        "extraction_ratio": rate.extraction_ratio,
        "final_rate_bps": rate.final_rate,
        "l": params.input_len_l,
        "m": params.output_len_m,
        "discarded_bits": discarded,
    }, art("rate.json"))

    # statistical validation of the extracted stream
    battery = run_battery(extracted, alpha=config.tests.alpha,
                          n_subsequences=config.tests.n_subsequences,
                          block_len=config.tests.block_len,
                          apen_m=config.tests.apen_m,
                          serial_m=config.tests.serial_m)
    _write_json(report_to_dict(battery), art("battery.json"))
    Path(art("battery.txt")).write_text(format_report_table(battery) + "\n",
                                        encoding="utf-8")
    if battery.proportions is not None:
        figures.plot_proportions(battery, art("proportions.png"))
    autocorr = tuple(autocorrelation(extracted, config.tests.max_lag))
    band = 4.0 / math.sqrt(len(extracted))
    _write_json({
        "n_bits": len(extracted),
        "band": band,
        "within_band": all(abs(r) < band for _, r in autocorr),
        "coefficients": [[lag, rho] for lag, rho in autocorr],
    }, art("autocorrelation.json"))
    figures.plot_autocorrelation(autocorr, len(extracted),
                                 art("autocorrelation.png"))

    return PipelineResult(
        artifacts=artifacts, fit=fit, recommended_voltage=recommended,
        entropy_report=entropy_report, rate=rate, battery=battery,
        autocorr=autocorr, discarded_bits=discarded)
