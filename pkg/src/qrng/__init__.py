"""Simulated avalanche-diode random number source and post-processing chain.

The package covers the full path from raw pulse trains to certified output:
a pulsed detector simulator, calibration of the voltage response curve,
worst-case (min-)entropy estimation, Toeplitz hashing, and a statistical
test battery for the extracted bits.
"""
from .bitstream import BitStream
from .calibration import (SweepPoint, TunnelingFit, binary_entropy,
                          fit_tunneling_curve, recommend_voltage, run_sweep)
from .entropy import (MinEntropyReport, block_values, extraction_ratio,
                      min_entropy)
from .errors import (FileFormatError, FitFailureError, InsufficientDataError,
                     InvalidArgumentError, OutputTooShortError, QRNGError,
                     TooShortInputError, UndefinedVarianceError,
                     UnreachableTargetError, UnsupportedConfigError)
from .extractor import (ExtractorParams, compute_output_length,
                        derive_seed_stream, extract_fft, extract_naive,
                        extract_stream, fft_fallback_count, worker_count)
from .pipeline import (ExtractConfig, IOConfig, PipelineConfig,
                       PipelineResult, RateReport, SweepConfig, TestsConfig,
                       config_from_dict, config_to_dict, default_config,
                       load_config, make_rate_report, run_pipeline)
from .simulator import (SourceConfig, TunnelingModel, effective_mean,
                        simulate_pulse_train, tunneling_probability)
from .stattests import (TestReport, TestResult, approximate_entropy,
                        autocorrelation, block_frequency, cumulative_sums,
                        format_report_table, longest_run_of_ones,
                        min_pass_rate, monobit_frequency, report_to_dict,
                        run_battery, runs, serial)

__version__ = "0.1.0"

__all__ = [
    "BitStream",
    "ExtractConfig",
    "ExtractorParams",
    "FileFormatError",
    "FitFailureError",
    "IOConfig",
    "InsufficientDataError",
    "InvalidArgumentError",
    "MinEntropyReport",
    "OutputTooShortError",
    "PipelineConfig",
    "PipelineResult",
    "QRNGError",
    "RateReport",
    "SourceConfig",
    "SweepConfig",
    "SweepPoint",
    "TestReport",
    "TestResult",
    "TestsConfig",
    "TooShortInputError",
    "TunnelingFit",
    "TunnelingModel",
    "UndefinedVarianceError",
    "UnreachableTargetError",
    "UnsupportedConfigError",
    "approximate_entropy",
    "autocorrelation",
    "binary_entropy",
    "block_frequency",
    "block_values",
    "compute_output_length",
    "config_from_dict",
    "config_to_dict",
    "cumulative_sums",
    "default_config",
    "derive_seed_stream",
    "effective_mean",
    "extract_fft",
    "extract_naive",
    "extract_stream",
    "extraction_ratio",
    "fft_fallback_count",
    "fit_tunneling_curve",
    "format_report_table",
    "load_config",
    "longest_run_of_ones",
    "make_rate_report",
    "min_entropy",
    "min_pass_rate",
    "monobit_frequency",
    "recommend_voltage",
    "report_to_dict",
    "run_battery",
    "run_pipeline",
    "run_sweep",
    "runs",
    "serial",
    "simulate_pulse_train",
    "tunneling_probability",
    "worker_count",
]
