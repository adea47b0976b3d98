"""Toeplitz-hashing randomness extraction over GF(2).

The extractor multiplies each l-bit input chunk by an l x m binary
Toeplitz matrix defined by a single (l + m - 1)-bit seed: entry (i, j) is
seed[i - j + m - 1], so the seed runs down the first column and then
across the first row. Output length m comes from the leftover-hash
sizing rule in compute_output_length.

Two implementations must agree bit for bit: a packed-word naive product
(the oracle) and an FFT path that evaluates all m parities as one cyclic
cross-correlation. The FFT path validates its rounding slack and falls
back to the naive path if precision ever degrades.
"""
from __future__ import annotations

import logging
import math
import os
import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .bitstream import BitStream
from .errors import InvalidArgumentError, OutputTooShortError
from .rng import random_bits

log = logging.getLogger(__name__)

H0_MODES = ("log2l", "block")
SECURITY_SIGNS = ("subtract", "paper")

# parity of each byte value, for popcount-parity after an XOR reduce
_PARITY = np.array([bin(b).count("1") & 1 for b in range(256)], dtype=np.uint8)

_fallback_lock = threading.Lock()
_fallback_count = 0


def fft_fallback_count() -> int:
    """How many times the FFT path has handed an instance to the naive path."""
    return _fallback_count


def _record_fallback(n: int = 1) -> None:
    global _fallback_count
    with _fallback_lock:
        _fallback_count += n


def worker_count(requested=None) -> int:
    """Worker threads to use: explicit argument, else QRNG_THREADS, else all cores."""
    if requested is None:
        requested = int(os.environ.get("QRNG_THREADS", "0") or 0)
    if requested <= 0:
        return os.cpu_count() or 1
    return requested


def compute_output_length(l: int, h_min: float, block_bits: int,
                          epsilon_log2: int, h0_mode: str = "log2l",
                          security_sign: str = "subtract") -> int:
    """Extractable bits per l-bit chunk.

    m = floor(l * h_min / H0 - 2 * log2(1/epsilon)) with H0 = log2(l)
    (h0_mode "log2l") or H0 = block_bits (h0_mode "block"). The security
    term is subtracted under the leftover-hash convention; security_sign
    "paper" flips it to the additive reading of the published formula,
    kept only to reproduce that rate arithmetic.
    """
    if l < 2:
        raise InvalidArgumentError(f"l must be at least 2, got {l}")
    if not (0 < h_min <= block_bits):
        raise InvalidArgumentError(
            f"h_min must lie in (0, {block_bits}], got {h_min}")
    if epsilon_log2 > -1:
        raise InvalidArgumentError(
            f"epsilon_log2 must be a negative integer, got {epsilon_log2}")
    if h0_mode not in H0_MODES:
        raise InvalidArgumentError(f"h0_mode must be one of {H0_MODES}")
    if security_sign not in SECURITY_SIGNS:
        raise InvalidArgumentError(f"security_sign must be one of {SECURITY_SIGNS}")

    h0 = math.log2(l) if h0_mode == "log2l" else float(block_bits)
    security = 2.0 * epsilon_log2
    if security_sign == "paper":
        security = -security
    m = math.floor(l * h_min / h0 + security)
    if m <= 0:
        raise OutputTooShortError(
            f"l={l} with h_min={h_min} cannot support 2^{epsilon_log2} security")
    return m


@dataclass(frozen=True)
class ExtractorParams:
    input_len_l: int
    output_len_m: int
    h_min: float
    block_bits: int
    epsilon_log2: int
    seed: BitStream

    def __post_init__(self):
        if not (0 < self.output_len_m < self.input_len_l):
            raise InvalidArgumentError(
                f"need 0 < m < l, got m={self.output_len_m}, l={self.input_len_l}")
        expected = self.input_len_l + self.output_len_m - 1
        if len(self.seed) != expected:
            raise InvalidArgumentError(
                f"seed must hold l+m-1 = {expected} bits, got {len(self.seed)}")


def derive_seed_stream(seed_key: int, l: int, m: int) -> BitStream:
    """Deterministic Toeplitz seed of l+m-1 bits from an integer key."""
    return BitStream.from_bits(random_bits(seed_key, l + m - 1))


def _check_input(input_stream: BitStream, params: ExtractorParams) -> None:
    if len(input_stream) != params.input_len_l:
        raise InvalidArgumentError(
            f"input holds {len(input_stream)} bits, expected l={params.input_len_l}")


def _seed_window_matrix(params: ExtractorParams) -> np.ndarray:
    """Packed matrix whose row j is seed[m-1-j : m-1-j+l]."""
    seed_bits = params.seed.to_bits()
    windows = np.lib.stride_tricks.sliding_window_view(
        seed_bits, params.input_len_l)[:params.output_len_m]
    return np.packbits(windows[::-1], axis=1)


def _naive_rows(packed_rows: np.ndarray, window_matrix: np.ndarray) -> np.ndarray:
    """GF(2) product of each packed input row with the seed window matrix."""
    # parity of popcount distributes over XOR, so reduce bytes first
    products = packed_rows[:, None, :] & window_matrix[None, :, :]
    folded = np.bitwise_xor.reduce(products, axis=2)
    return _PARITY[folded]


def extract_naive(input_stream: BitStream, params: ExtractorParams) -> BitStream:
    """Reference bit-packed Toeplitz product: output bit j = parity(d & seed window j)."""
    _check_input(input_stream, params)
    rows = _naive_rows(input_stream.packed[None, :], _seed_window_matrix(params))
    return BitStream.from_bits(rows[0])


def _fft_size(params: ExtractorParams) -> int:
    return scipy.fft.next_fast_len(
        params.input_len_l + params.output_len_m - 1, real=True)


def _fft_correlate(data_rows: np.ndarray, seed_transform: np.ndarray,
                   n_fft: int, m: int, workers: int) -> np.ndarray:
    spectra = scipy.fft.rfft(data_rows, n_fft, axis=1, workers=workers)
    corr = scipy.fft.irfft(np.conj(spectra) * seed_transform, n_fft,
                           axis=1, workers=workers)
    return corr[:, :m]


def extract_fft(input_stream: BitStream, params: ExtractorParams) -> BitStream:
    """FFT path, bit-identical to extract_naive.

    Output bit j equals the parity of cross-correlation coefficient
    m-1-j between the input and the seed. Coefficients are integers; if
    the worst rounding slack reaches 0.25 the instance silently falls
    back to the naive path and a diagnostic counter is bumped.
    """
    _check_input(input_stream, params)
    m = params.output_len_m
    n_fft = _fft_size(params)
    seed_transform = scipy.fft.rfft(params.seed.to_bits().astype(np.float32), n_fft)
    corr = _fft_correlate(input_stream.to_bits().astype(np.float32)[None, :],
                          seed_transform, n_fft, m, workers=1)
    rounded = np.rint(corr)
    if float(np.abs(corr - rounded).max()) >= 0.25:
        _record_fallback()
        return extract_naive(input_stream, params)
    return BitStream.from_bits((rounded[0, ::-1].astype(np.int64) & 1).astype(np.uint8))


def extract_stream(input_stream: BitStream, params: ExtractorParams,
                   threads=None) -> BitStream:
    """Extract every consecutive l-bit chunk of the input with one shared seed.

    Chunks are batched through the FFT path (per-batch slack validation,
    naive fallback per batch); trailing bits that do not fill a chunk are
    discarded and logged, never zero padded.
    """
    l, m = params.input_len_l, params.output_len_m
    if len(input_stream) < l:
        raise InvalidArgumentError(
            f"input holds {len(input_stream)} bits, need at least l={l}")
    n_chunks = len(input_stream) // l
    discarded = len(input_stream) - n_chunks * l
    if discarded:
        log.info("extract_stream: discarding %d trailing bits", discarded)

    workers = worker_count(threads)
    n_fft = _fft_size(params)
    seed_bits = params.seed.to_bits()
    # single precision keeps every correlation value exact (they are small
    # integers, worst observed slack ~4e-4) and halves transform cost; the
    # slack check below still guards the rounding step
    seed_transform = scipy.fft.rfft(seed_bits.astype(np.float32), n_fft)
    window_matrix = None

    bits = input_stream.to_bits()[:n_chunks * l].reshape(n_chunks, l)
    batch_rows = max(1, (1 << 22) // n_fft)
    out_rows = np.empty((n_chunks, m), dtype=np.uint8)
    for lo in range(0, n_chunks, batch_rows):
        hi = min(lo + batch_rows, n_chunks)
        corr = _fft_correlate(bits[lo:hi].astype(np.float32), seed_transform,
                              n_fft, m, workers)
        rounded = np.rint(corr)
        if float(np.abs(corr - rounded).max()) >= 0.25:
            _record_fallback(hi - lo)
            if window_matrix is None:
                window_matrix = _seed_window_matrix(params)
            out_rows[lo:hi] = _naive_rows(
                np.packbits(bits[lo:hi], axis=1), window_matrix)
        else:
            out_rows[lo:hi] = rounded[:, ::-1].astype(np.int32) & 1
    return BitStream.from_bits(out_rows.reshape(-1))
