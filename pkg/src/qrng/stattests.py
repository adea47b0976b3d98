"""Statistical validation battery.

Seven test families with published reference constructions (frequency,
block frequency, runs, longest run of ones, cumulative sums, approximate
entropy, serial), plus lag autocorrelation. Each family is implemented as
a formula core operating on a 0/1 array, wrapped by a public operation
that enforces the family's minimum input length. run_battery decomposes a
stream into equal chunks and aggregates per-test pass proportions with
the standard 3-sigma binomial band around 1 - alpha.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc, gammaincc, ndtr

from .bitstream import BitStream
from .errors import (InvalidArgumentError, TooShortInputError,
                     UndefinedVarianceError)

DEFAULT_ALPHA = 0.01


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    passed: bool
    n_bits: int


@dataclass(frozen=True)
class TestReport:
    """Full-stream results plus per-test pass proportions over chunks.

    proportions is None when the battery ran on the whole stream only.
    proportion_pass is the fraction of chunks that passed every test.
    passed requires every full-stream p-value >= alpha and, in
    multi-sequence mode, every per-test proportion >= min_pass_rate.
    """
    results: tuple
    alpha: float
    n_subsequences: int
    proportions: Optional[dict]
    proportion_pass: Optional[float]
    min_pass_rate: Optional[float]
    passed: bool


def _result(name: str, statistic: float, p_value: float, n: int,
            alpha: float) -> TestResult:
    p_value = float(min(max(p_value, 0.0), 1.0))
    return TestResult(test_name=name, statistic=float(statistic),
                      p_value=p_value, passed=p_value >= alpha, n_bits=n)


def _bits_of(stream) -> np.ndarray:
    if isinstance(stream, BitStream):
        return stream.to_bits()
    return np.asarray(stream, dtype=np.uint8)


def _require(bits: np.ndarray, minimum: int, name: str) -> None:
    if bits.size < minimum:
        raise TooShortInputError(
            f"{name} needs at least {minimum} bits, got {bits.size}")


# ---- formula cores ----

def _monobit_core(bits: np.ndarray):
    n = bits.size
    s = 2 * int(bits.sum()) - n
    s_obs = abs(s) / math.sqrt(n)
    return s_obs, float(erfc(s_obs / math.sqrt(2)))


def _block_frequency_core(bits: np.ndarray, block_len: int):
    n_blocks = bits.size // block_len
    sums = bits[:n_blocks * block_len].reshape(n_blocks, block_len).sum(axis=1)
    props = sums / block_len
    chi2 = 4.0 * block_len * float(np.sum((props - 0.5) ** 2))
    return chi2, float(gammaincc(n_blocks / 2.0, chi2 / 2.0))


def _runs_core(bits: np.ndarray):
    n = bits.size
    pi = float(bits.mean())
    v_obs = 1 + int(np.count_nonzero(np.diff(bits)))
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        # the frequency precondition failed; the construction defines p = 0
        return v_obs, 0.0
    num = abs(v_obs - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return v_obs, float(erfc(num / den))


_LONGEST_RUN_TABLES = (
    # (min n, block len M, class boundaries, class probabilities)
    (750000, 10000, (10, 11, 12, 13, 14, 15, 16),
     (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6272, 128, (4, 5, 6, 7, 8, 9),
     (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 2, 3, 4),
     (0.2148, 0.3672, 0.2305, 0.1875)),
)


def _longest_run_per_block(bits: np.ndarray, n_blocks: int, block_len: int):
    blocks = np.zeros((n_blocks, block_len + 1), dtype=np.uint8)
    blocks[:, :block_len] = bits[:n_blocks * block_len].reshape(n_blocks, block_len)
    flat = blocks.reshape(-1)
    prev = np.concatenate(([0], flat[:-1]))
    nxt = np.concatenate((flat[1:], [0]))
    starts = np.flatnonzero((flat == 1) & (prev == 0))
    ends = np.flatnonzero((flat == 1) & (nxt == 0))
    longest = np.zeros(n_blocks, dtype=np.int64)
    np.maximum.at(longest, starts // (block_len + 1), ends - starts + 1)
    return longest


def _longest_run_core(bits: np.ndarray):
    n = bits.size
    for min_n, block_len, classes, pi in _LONGEST_RUN_TABLES:
        if n >= min_n:
            break
    n_blocks = n // block_len
    longest = _longest_run_per_block(bits, n_blocks, block_len)
    k = len(classes) - 1
    nu = np.zeros(k + 1, dtype=np.int64)
    nu[0] = int(np.count_nonzero(longest <= classes[0]))
    nu[k] = int(np.count_nonzero(longest >= classes[-1]))
    for c in range(1, k):
        nu[c] = int(np.count_nonzero(longest == classes[c]))
    expected = n_blocks * np.asarray(pi)
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    return chi2, float(gammaincc(k / 2.0, chi2 / 2.0))


def _cusum_core(bits: np.ndarray, reverse: bool = False, chunk: int = 1 << 24):
    walk = bits[::-1] if reverse else bits
    n = walk.size
    z = 0
    offset = 0
    for lo in range(0, n, chunk):
        steps = walk[lo:lo + chunk].astype(np.int64) * 2 - 1
        partial = np.cumsum(steps)
        partial += offset
        z = max(z, int(np.abs(partial).max()))
        offset = int(partial[-1])
    sqrt_n = math.sqrt(n)
    k_hi = math.floor((n / z - 1) / 4)
    ks = np.arange(math.floor((-n / z + 1) / 4), k_hi + 1)
    term1 = float(np.sum(ndtr((4 * ks + 1) * z / sqrt_n)
                         - ndtr((4 * ks - 1) * z / sqrt_n)))
    ks = np.arange(math.floor((-n / z - 3) / 4), k_hi + 1)
    term2 = float(np.sum(ndtr((4 * ks + 3) * z / sqrt_n)
                         - ndtr((4 * ks + 1) * z / sqrt_n)))
    return z, 1.0 - term1 + term2


def _window_words(bits: np.ndarray, m: int) -> np.ndarray:
    """Values of all n overlapping m-bit windows, wrapping around the end."""
    n = bits.size
    ext = np.concatenate((bits, bits[:m - 1])) if m > 1 else bits
    dtype = np.uint16 if m <= 16 else np.uint32
    words = np.zeros(n, dtype=dtype)
    for k in range(m):
        words = (words << 1) | ext[k:k + n]
    return words


def _psi_sq(bits: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    n = bits.size
    counts = np.bincount(_window_words(bits, m), minlength=1 << m)
    return float((1 << m) / n * np.dot(counts, counts) - n)


def _serial_core(bits: np.ndarray, m: int):
    psi_m = _psi_sq(bits, m)
    psi_1 = _psi_sq(bits, m - 1)
    psi_2 = _psi_sq(bits, m - 2)
    d1 = psi_m - psi_1
    d2 = psi_m - 2 * psi_1 + psi_2
    p1 = float(gammaincc(2 ** (m - 2), d1 / 2.0))
    p2 = float(gammaincc(2 ** (m - 3), d2 / 2.0))
    return d1, p1, d2, p2


def _phi(bits: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = np.bincount(_window_words(bits, m), minlength=1 << m)
    freqs = counts[counts > 0] / bits.size
    return float(np.sum(freqs * np.log(freqs)))


def _apen_core(bits: np.ndarray, m: int):
    apen = _phi(bits, m) - _phi(bits, m + 1)
    chi2 = 2.0 * bits.size * (math.log(2.0) - apen)
    return chi2, float(gammaincc(2 ** (m - 1), chi2 / 2.0))


# ---- public operations ----

def monobit_frequency(stream, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Balance of ones and zeros over the whole stream."""
    bits = _bits_of(stream)
    _require(bits, 100, "monobit_frequency")
    stat, p = _monobit_core(bits)
    return _result("frequency", stat, p, bits.size, alpha)


def block_frequency(stream, block_len: int = 128,
                    alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Balance of ones within each block_len-bit block."""
    bits = _bits_of(stream)
    _require(bits, max(100, block_len), "block_frequency")
    stat, p = _block_frequency_core(bits, block_len)
    return _result("block_frequency", stat, p, bits.size, alpha)


def runs(stream, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Total number of maximal runs against the expectation for i.i.d. bits."""
    bits = _bits_of(stream)
    _require(bits, 100, "runs")
    stat, p = _runs_core(bits)
    return _result("runs", stat, p, bits.size, alpha)


def longest_run_of_ones(stream, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Distribution of the longest 1-run per block, block size chosen by n."""
    bits = _bits_of(stream)
    _require(bits, 128, "longest_run_of_ones")
    stat, p = _longest_run_core(bits)
    return _result("longest_run", stat, p, bits.size, alpha)


def cumulative_sums(stream, reverse: bool = False,
                    alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Maximum excursion of the +/-1 random walk (forward or reversed)."""
    bits = _bits_of(stream)
    _require(bits, 100, "cumulative_sums")
    stat, p = _cusum_core(bits, reverse)
    name = "cumulative_sums_reverse" if reverse else "cumulative_sums"
    return _result(name, stat, p, bits.size, alpha)


def approximate_entropy(stream, m: int = 5,
                        alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Regularity of overlapping m-bit patterns versus (m+1)-bit patterns."""
    bits = _bits_of(stream)
    if not (1 <= m <= 16):
        raise InvalidArgumentError(
            f"approximate_entropy needs 1 <= m <= 16, got {m}")
    _require(bits, max(100, 1 << (m + 2)), "approximate_entropy")
    stat, p = _apen_core(bits, m)
    return _result("approximate_entropy", stat, p, bits.size, alpha)


def serial(stream, m: int = 5, second: bool = False,
           alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Uniformity of overlapping m-bit patterns (first generalized statistic).

    With second=True, returns the second-difference statistic instead.
    """
    bits = _bits_of(stream)
    if not (2 <= m <= 16):
        raise InvalidArgumentError(f"serial needs 2 <= m <= 16, got {m}")
    _require(bits, max(100, 1 << (m + 2)), "serial")
    d1, p1, d2, p2 = _serial_core(bits, m)
    if second:
        return _result("serial_2", d2, p2, bits.size, alpha)
    return _result("serial", d1, p1, bits.size, alpha)


def autocorrelation(stream, max_lag: int = 100):
    """Normalized lag correlations [(lag, rho)] for lag = 1..max_lag."""
    bits = _bits_of(stream)
    if max_lag < 1:
        raise TooShortInputError(f"max_lag must be at least 1, got {max_lag}")
    if bits.size < 10 * max_lag:
        raise TooShortInputError(
            f"autocorrelation needs at least {10 * max_lag} bits, got {bits.size}")
    x = bits.astype(np.float64)
    x -= x.mean()
    var = float(np.mean(x * x))
    if var == 0.0:
        raise UndefinedVarianceError("autocorrelation of a constant stream")
    out = []
    for lag in range(1, max_lag + 1):
        cov = float(np.dot(x[:-lag], x[lag:])) / (bits.size - lag)
        out.append((lag, cov / var))
    return out


# ---- battery ----

def min_pass_rate(alpha: float, n_sequences: int) -> float:
    """Lower 3-sigma binomial band around the expected pass rate 1 - alpha."""
    p = 1.0 - alpha
    return p - 3.0 * math.sqrt(p * (1.0 - p) / n_sequences)


def _battery_suite(alpha, block_len, apen_m, serial_m):
    return (
        ("frequency", lambda b: monobit_frequency(b, alpha)),
        ("block_frequency", lambda b: block_frequency(b, block_len, alpha)),
        ("runs", lambda b: runs(b, alpha)),
        ("longest_run", lambda b: longest_run_of_ones(b, alpha)),
        ("cumulative_sums", lambda b: cumulative_sums(b, False, alpha)),
        ("cumulative_sums_reverse", lambda b: cumulative_sums(b, True, alpha)),
        ("approximate_entropy", lambda b: approximate_entropy(b, apen_m, alpha)),
        ("serial", lambda b: serial(b, serial_m, False, alpha)),
        ("serial_2", lambda b: serial(b, serial_m, True, alpha)),
    )


def run_battery(stream, alpha: float = DEFAULT_ALPHA, n_subsequences: int = 100,
                block_len: int = 128, apen_m: int = 5,
                serial_m: int = 5) -> TestReport:
    """Run every test on the full stream and on equal decomposed chunks."""
    bits = _bits_of(stream)
    suite = _battery_suite(alpha, block_len, apen_m, serial_m)
    min_needed = max(100, block_len, 128, 1 << (apen_m + 2), 1 << (serial_m + 2))
    _require(bits, min_needed, "run_battery")
    results = tuple(fn(bits) for _, fn in suite)

    if n_subsequences < 2:
        passed = all(r.passed for r in results)
        return TestReport(results=results, alpha=alpha,
                          n_subsequences=max(n_subsequences, 1),
                          proportions=None, proportion_pass=None,
                          min_pass_rate=None, passed=passed)

    chunk_len = bits.size // n_subsequences
    if chunk_len < min_needed:
        raise TooShortInputError(
            f"decomposition into {n_subsequences} chunks leaves {chunk_len} bits "
            f"per chunk; the battery needs at least {min_needed}")
    chunks = bits[:n_subsequences * chunk_len].reshape(n_subsequences, chunk_len)
    pass_counts = {name: 0 for name, _ in suite}
    all_pass = 0
    for row in chunks:
        row_ok = True
        for name, fn in suite:
            ok = fn(row).passed
            pass_counts[name] += ok
            row_ok &= ok
        all_pass += row_ok
    proportions = {name: pass_counts[name] / n_subsequences for name, _ in suite}
    band = min_pass_rate(alpha, n_subsequences)
    passed = (all(r.passed for r in results)
              and all(p >= band for p in proportions.values()))
    return TestReport(results=results, alpha=alpha, n_subsequences=n_subsequences,
                      proportions=proportions, proportion_pass=all_pass / n_subsequences,
                      min_pass_rate=band, passed=passed)


def report_to_dict(report: TestReport) -> dict:
    return {
        "alpha": report.alpha,
        "n_subsequences": report.n_subsequences,
        "min_pass_rate": report.min_pass_rate,
        "proportion_pass": report.proportion_pass,
        "passed": report.passed,
        "results": [
            {
                "test_name": r.test_name,
                "statistic": r.statistic,
                "p_value": r.p_value,
                "passed": r.passed,
                "n_bits": r.n_bits,
                "proportion": (report.proportions or {}).get(r.test_name),
            }
            for r in report.results
        ],
    }


def format_report_table(report: TestReport) -> str:
    """Fixed-width table: name, p-value, chunk pass proportion, assessment."""
    lines = [f"{'test':<24} {'p-value':>10} {'proportion':>11}  assessment"]
    for r in report.results:
        prop = (report.proportions or {}).get(r.test_name)
        prop_txt = f"{prop:11.4f}" if prop is not None else f"{'-':>11}"
        ok = r.passed and (prop is None or report.min_pass_rate is None
                           or prop >= report.min_pass_rate)
        lines.append(f"{r.test_name:<24} {r.p_value:10.6f} {prop_txt}  "
                     f"{'pass' if ok else 'FAIL'}")
    if report.min_pass_rate is not None:
        lines.append(f"minimum pass proportion at alpha={report.alpha}, "
                     f"N={report.n_subsequences}: {report.min_pass_rate:.5f}")
    lines.append(f"overall: {'pass' if report.passed else 'FAIL'}")
    return "\n".join(lines)
