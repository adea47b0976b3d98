"""Command line front end.

Subcommands mirror the pipeline stages so each can be run on its own:
simulate, calibrate, entropy, extract, test, pipeline. Every subcommand
accepts --config pointing at a JSON file plus per-field override flags.

Exit codes: 0 success, 2 usage or I/O problem, 3 output failed quality
checks.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .bitstream import BitStream
from .calibration import (SweepPoint, fit_tunneling_curve, recommend_voltage,
                          run_sweep)
from .entropy import min_entropy
from .errors import QRNGError, TooShortInputError, UndefinedVarianceError
from .extractor import ExtractorParams, compute_output_length, derive_seed_stream, extract_stream
from .pipeline import (PipelineConfig, default_config, load_config,
                       make_rate_report, run_pipeline, write_fit_reports,
                       write_sweep_csv)
from .simulator import simulate_pulse_train
from .stattests import autocorrelation, format_report_table, report_to_dict, run_battery

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_QUALITY = 3


def _load_or_default(args) -> PipelineConfig:
    if args.config:
        return load_config(args.config)
    return default_config()


def _apply_overrides(config: PipelineConfig, args) -> PipelineConfig:
    """Fold --field overrides from the parsed args into the config tree."""
    src = config.source
    model = src.model
    for name in ("A", "B", "V0"):
        v = getattr(args, f"model_{name.lower()}", None)
        if v is not None:
            model = dataclasses.replace(model, **{name: v})
    if model is not src.model:
        src = dataclasses.replace(src, model=model)
    for name in ("u_high", "delta_u", "pulse_freq", "thermal_rate",
                 "afterpulse_prob", "afterpulse_decay", "deadtime_pulses",
                 "protect_period", "protect_duration", "rng_seed"):
        v = getattr(args, name, None)
        if v is not None:
            src = dataclasses.replace(src, **{name: v})
    if src is not config.source:
        config = dataclasses.replace(config, source=src)

    if getattr(args, "n_pulses", None) is not None:
        config = dataclasses.replace(config, n_pulses=args.n_pulses)
    if getattr(args, "block_bits", None) is not None:
        config = dataclasses.replace(config, entropy_block_bits=args.block_bits)

    ext = config.extract
    for arg_name, field in (("l", "l"), ("epsilon_log2", "epsilon_log2"),
                            ("h0_mode", "h0_mode"),
                            ("security_sign", "security_sign"),
                            ("seed_key", "seed_key"),
                            ("seed_file", "seed_path")):
        v = getattr(args, arg_name, None)
        if v is not None:
            ext = dataclasses.replace(ext, **{field: v})
    if ext is not config.extract:
        config = dataclasses.replace(config, extract=ext)

    tests = config.tests
    for name in ("alpha", "n_subsequences", "max_lag", "block_len",
                 "apen_m", "serial_m"):
        v = getattr(args, name, None)
        if v is not None:
            tests = dataclasses.replace(tests, **{name: v})
    if tests is not config.tests:
        config = dataclasses.replace(config, tests=tests)

    io = config.io
    if getattr(args, "out_dir", None) is not None:
        io = dataclasses.replace(io, out_dir=args.out_dir)
    if getattr(args, "raw_rate_bps", None) is not None:
        io = dataclasses.replace(io, raw_rate_bps=args.raw_rate_bps)
    if getattr(args, "export_ascii", False):
        io = dataclasses.replace(io, export_ascii=True)
    if getattr(args, "headerless", False):
        io = dataclasses.replace(io, headerless=True)
    if io is not config.io:
        config = dataclasses.replace(config, io=io)
    sweep = config.sweep
    if getattr(args, "voltages", None) is not None:
        sweep = dataclasses.replace(
            sweep, voltages=tuple(float(v) for v in args.voltages.split(",")))
    if getattr(args, "pulses_per_point", None) is not None:
        sweep = dataclasses.replace(sweep, pulses_per_point=args.pulses_per_point)
    if sweep is not config.sweep:
        config = dataclasses.replace(config, sweep=sweep)
    return config


def _add_config_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE",
                   help="JSON configuration file (defaults apply otherwise)")


def _add_source_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("source overrides")
    g.add_argument("--model-a", type=float, metavar="A", dest="model_a")
    g.add_argument("--model-b", type=float, metavar="B", dest="model_b")
    g.add_argument("--model-v0", type=float, metavar="V0", dest="model_v0")
    g.add_argument("--u-high", type=float, dest="u_high")
    g.add_argument("--delta-u", type=float, dest="delta_u")
    g.add_argument("--pulse-freq", type=float, dest="pulse_freq")
    g.add_argument("--thermal-rate", type=float, dest="thermal_rate")
    g.add_argument("--afterpulse-prob", type=float, dest="afterpulse_prob")
    g.add_argument("--afterpulse-decay", type=float, dest="afterpulse_decay")
    g.add_argument("--deadtime-pulses", type=int, dest="deadtime_pulses")
    g.add_argument("--protect-period", type=int, dest="protect_period")
    g.add_argument("--protect-duration", type=int, dest="protect_duration")
    g.add_argument("--rng-seed", type=int, dest="rng_seed")


def _add_format_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--export-ascii", action="store_true",
                   help="also write bits as ASCII 0/1 text")
    p.add_argument("--headerless", action="store_true",
                   help="write/read packed bits with no 16-byte header")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrng",
        description="Simulated avalanche-diode randomness source with "
                    "calibration, extraction, and statistical validation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a raw detector bit stream")
    _add_config_arg(p)
    _add_source_args(p)
    p.add_argument("--n-pulses", type=int, dest="n_pulses")
    p.add_argument("-o", "--output", required=True, metavar="FILE")
    _add_format_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="sweep bias voltages and fit the "
                                         "response curve")
    _add_config_arg(p)
    _add_source_args(p)
    p.add_argument("--voltages", metavar="V1,V2,...",
                   help="comma separated sweep voltages")
    p.add_argument("--pulses-per-point", type=int, dest="pulses_per_point")
    p.add_argument("--no-reject", action="store_true",
                   help="skip outlier rejection")
    p.add_argument("--sweep-csv", metavar="FILE",
                   help="read sweep points from a CSV instead of simulating")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("entropy", help="estimate worst-case entropy per block")
    _add_config_arg(p)
    p.add_argument("-i", "--input", required=True, metavar="FILE")
    p.add_argument("--block-bits", type=int, dest="block_bits")
    p.add_argument("--headerless", action="store_true")
    p.add_argument("--json", metavar="FILE", help="also write the report here")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("extract", help="Toeplitz-hash a raw stream")
    _add_config_arg(p)
    p.add_argument("-i", "--input", required=True, metavar="FILE")
    p.add_argument("-o", "--output", required=True, metavar="FILE")
    p.add_argument("--h-min", type=float, dest="h_min",
                   help="worst-case bits per block (else --entropy-json)")
    p.add_argument("--entropy-json", metavar="FILE",
                   help="report written by the entropy subcommand")
    p.add_argument("--block-bits", type=int, dest="block_bits")
    p.add_argument("--l", type=int, dest="l")
    p.add_argument("--epsilon-log2", type=int, dest="epsilon_log2")
    p.add_argument("--h0-mode", choices=("log2l", "block"), dest="h0_mode")
    p.add_argument("--security-sign", choices=("subtract", "paper"),
                   dest="security_sign")
    p.add_argument("--seed-key", type=int, dest="seed_key")
    p.add_argument("--seed-file", dest="seed_file",
                   help="read the Toeplitz seed from this file")
    p.add_argument("--save-seed", metavar="FILE",
                   help="write the seed that was used")
    p.add_argument("--raw-rate-bps", type=float, dest="raw_rate_bps")
    p.add_argument("--threads", type=int,
                   help="FFT worker threads (0 = all cores)")
    _add_format_args(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("test", help="run the statistical battery on a stream")
    _add_config_arg(p)
    p.add_argument("-i", "--input", required=True, metavar="FILE")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--n-subsequences", type=int, dest="n_subsequences")
    p.add_argument("--block-len", type=int, dest="block_len")
    p.add_argument("--apen-m", type=int, dest="apen_m")
    p.add_argument("--serial-m", type=int, dest="serial_m")
    p.add_argument("--max-lag", type=int, dest="max_lag")
    p.add_argument("--headerless", action="store_true")
    p.add_argument("--json", metavar="FILE", help="also write the report here")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_config_arg(p)
    _add_source_args(p)
    p.add_argument("--n-pulses", type=int, dest="n_pulses")
    p.add_argument("--block-bits", type=int, dest="block_bits")
    p.add_argument("--l", type=int, dest="l")
    p.add_argument("--epsilon-log2", type=int, dest="epsilon_log2")
    p.add_argument("--h0-mode", choices=("log2l", "block"), dest="h0_mode")
    p.add_argument("--security-sign", choices=("subtract", "paper"),
                   dest="security_sign")
    p.add_argument("--seed-key", type=int, dest="seed_key")
    p.add_argument("--seed-file", dest="seed_file")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--n-subsequences", type=int, dest="n_subsequences")
    p.add_argument("--max-lag", type=int, dest="max_lag")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--raw-rate-bps", type=float, dest="raw_rate_bps")
    p.add_argument("--voltages", metavar="V1,V2,...")
    p.add_argument("--pulses-per-point", type=int, dest="pulses_per_point")
    _add_format_args(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


# ---- subcommand bodies ----

def cmd_simulate(args) -> int:
    config = _apply_overrides(_load_or_default(args), args)
    stream = simulate_pulse_train(config.source, config.n_pulses)
    stream.to_file(args.output, headerless=args.headerless)
    if args.export_ascii:
        stream.to_ascii_file(Path(args.output).with_suffix(".txt"))
    counts = int(stream.to_bits().sum()) if len(stream) else 0
    seconds = config.n_pulses / config.source.pulse_freq
    rate = counts / seconds if seconds > 0 else 0.0
    print(f"pulses:        {config.n_pulses}")
    print(f"detections:    {counts}")
    print(f"counting rate: {rate:.6g} counts/s")
    print(f"wrote {len(stream)} bits to {args.output}")
    return EXIT_OK


def _read_sweep_csv(path):
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "voltage,mean,entropy,n_samples":
            raise QRNGError(f"unrecognized sweep CSV header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            v, mean, ent, n = line.split(",")
            points.append(SweepPoint(voltage=float(v), mean=float(mean),
                                     entropy=float(ent), n_samples=int(n)))
    return points


def cmd_calibrate(args) -> int:
    config = _apply_overrides(_load_or_default(args), args)
    if args.sweep_csv:
        points = _read_sweep_csv(args.sweep_csv)
    else:
        points = run_sweep(config.source, config.sweep.voltages,
                           config.sweep.pulses_per_point)
    fit = fit_tunneling_curve(points, reject_outliers=not args.no_reject)
    recommended = recommend_voltage(fit, target_mean=0.5)
    out = Path(config.io.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(points, out / "sweep.csv")
    write_fit_reports(fit, out / "fit.json", out / "fit.txt", recommended)
    from . import figures
    figures.plot_calibration(points, fit, out / "calibration_mean.png",
                             recommended)
    figures.plot_entropy_curve(points, out / "calibration_entropy.png")
    print((out / "fit.txt").read_text(encoding="utf-8"), end="")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_entropy(args) -> int:
    config = _apply_overrides(_load_or_default(args), args)
    stream = BitStream.from_file(args.input, headerless=args.headerless)
    report = min_entropy(stream, config.entropy_block_bits)
    payload = report.to_dict()
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_extract(args) -> int:
    config = _apply_overrides(_load_or_default(args), args)
    ext = config.extract
    block_bits = config.entropy_block_bits
    if args.h_min is not None:
        h_min = args.h_min
    elif args.entropy_json:
        with open(args.entropy_json, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        h_min = float(payload["h_min"])
        block_bits = int(payload.get("block_bits", block_bits))
    else:
        print("error: extract needs --h-min or --entropy-json", file=sys.stderr)
        return EXIT_USAGE

    stream = BitStream.from_file(args.input, headerless=args.headerless)
    m = compute_output_length(ext.l, h_min, block_bits, ext.epsilon_log2,
                              ext.h0_mode, ext.security_sign)
    if ext.seed_path:
        seed = BitStream.from_file(ext.seed_path)
    else:
        seed = derive_seed_stream(ext.seed_key, ext.l, m)
    params = ExtractorParams(input_len_l=ext.l, output_len_m=m, h_min=h_min,
                             block_bits=block_bits,
                             epsilon_log2=ext.epsilon_log2, seed=seed)
    extracted = extract_stream(stream, params, threads=args.threads)
    extracted.to_file(args.output, headerless=args.headerless)
    if args.export_ascii:
        extracted.to_ascii_file(Path(args.output).with_suffix(".txt"))
    if args.save_seed:
        seed.to_file(args.save_seed)
    rate = make_rate_report(args.raw_rate_bps or config.io.raw_rate_bps,
                            ext.l, m)
    print(f"l = {ext.l}, m = {m}, ratio = {rate.extraction_ratio:.6f}")
    print(f"raw rate   {rate.raw_rate:.6g} bit/s")
    print(f"final rate {rate.final_rate:.6g} bit/s")
    print(f"wrote {len(extracted)} bits to {args.output}")
    return EXIT_OK


def cmd_test(args) -> int:
    config = _apply_overrides(_load_or_default(args), args)
    t = config.tests
    stream = BitStream.from_file(args.input, headerless=args.headerless)
    report = run_battery(stream, alpha=t.alpha,
                         n_subsequences=t.n_subsequences,
                         block_len=t.block_len, apen_m=t.apen_m,
                         serial_m=t.serial_m)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(format_report_table(report))
    if t.max_lag >= 1 and len(stream) >= 10 * t.max_lag:
        try:
            coeffs = autocorrelation(stream, t.max_lag)
        except UndefinedVarianceError:
            # constant stream; the battery verdict above already failed it
            print("max |autocorrelation|: undefined for a constant stream")
        else:
            worst = max(abs(r) for _, r in coeffs)
            print(f"max |autocorrelation| over lags 1..{t.max_lag}: {worst:.6f}")
    return EXIT_OK if report.passed else EXIT_QUALITY


def cmd_pipeline(args) -> int:
    config = _apply_overrides(_load_or_default(args), args)
    result = run_pipeline(config)
    print(f"fit: A={result.fit.model.A:.6f} B={result.fit.model.B:.6f} "
          f"V0={result.fit.model.V0:.6f} r2={result.fit.r_squared:.6f}")
    print(f"recommended voltage for mean 1/2: {result.recommended_voltage:.4f}")
    print(f"h_min = {result.entropy_report.h_min:.6f} bits per "
          f"{result.entropy_report.block_bits}-bit block")
    print(f"extraction ratio {result.rate.extraction_ratio:.6f}, "
          f"final rate {result.rate.final_rate:.6g} bit/s")
    print(format_report_table(result.battery))
    print(f"artifacts in {config.io.out_dir}")
    return EXIT_OK if result.passed else EXIT_QUALITY


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TooShortInputError as exc:
        # not enough data for the requested quality checks
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    except QRNGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
