"""Toeplitz extraction: matrix law, dual implementations, sizing rule."""
import logging
import math

import numpy as np
import pytest

import qrng.extractor as extractor
from qrng.bitstream import BitStream
from qrng.errors import InvalidArgumentError, OutputTooShortError
from qrng.extractor import (ExtractorParams, compute_output_length,
                            derive_seed_stream, extract_fft, extract_naive,
                            extract_stream, fft_fallback_count, worker_count)
from qrng.pipeline import make_rate_report


def params_for(l, m, seed_bits):
    return ExtractorParams(input_len_l=l, output_len_m=m, h_min=1.0,
                           block_bits=8, epsilon_log2=-100,
                           seed=BitStream.from_bits(seed_bits))


def toeplitz_reference(d, seed_bits, l, m):
    """Direct dense evaluation of out[j] = xor_i d[i] * T[i, j] with
    T[i, j] = seed[i - j + m - 1]."""
    t = np.zeros((l, m), dtype=np.uint8)
    for i in range(l):
        for j in range(m):
            t[i, j] = seed_bits[i - j + m - 1]
    return (np.asarray(d, dtype=np.uint8) @ t) % 2


# ---- worked example ----

def test_hand_worked_example():
    params = params_for(3, 2, [1, 0, 1, 1])
    d = BitStream.from_bits([1, 1, 0])
    assert extract_naive(d, params).to_bits().tolist() == [1, 1]
    assert extract_fft(d, params).to_bits().tolist() == [1, 1]
    assert toeplitz_reference([1, 1, 0], [1, 0, 1, 1], 3, 2).tolist() == [1, 1]


def test_matches_dense_matrix_definition():
    rng = np.random.default_rng(20)
    for l, m in [(5, 3), (16, 8), (33, 20), (64, 1), (10, 9)]:
        seed_bits = rng.integers(0, 2, size=l + m - 1)
        params = params_for(l, m, seed_bits)
        d = rng.integers(0, 2, size=l)
        expected = toeplitz_reference(d, seed_bits, l, m)
        got = extract_naive(BitStream.from_bits(d), params)
        assert got.to_bits().tolist() == expected.tolist()


def test_one_hot_inputs_read_seed_windows():
    # a lone 1 at position i copies seed[i : i + m] reversed to the output
    rng = np.random.default_rng(21)
    l, m = 12, 5
    seed_bits = rng.integers(0, 2, size=l + m - 1)
    params = params_for(l, m, seed_bits)
    for i in range(l):
        d = np.zeros(l, dtype=np.uint8)
        d[i] = 1
        got = extract_naive(BitStream.from_bits(d), params)
        assert got.to_bits().tolist() == seed_bits[i:i + m][::-1].tolist()


def test_linearity_over_xor():
    rng = np.random.default_rng(22)
    l, m = 96, 40
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    x = rng.integers(0, 2, size=l).astype(np.uint8)
    y = rng.integers(0, 2, size=l).astype(np.uint8)
    ex = extract_naive(BitStream.from_bits(x), params).to_bits()
    ey = extract_naive(BitStream.from_bits(y), params).to_bits()
    exy = extract_naive(BitStream.from_bits(x ^ y), params).to_bits()
    assert (exy == (ex ^ ey)).all()


def test_zero_seed_and_zero_input():
    l, m = 20, 8
    zero_seed = params_for(l, m, np.zeros(l + m - 1, dtype=np.uint8))
    rng = np.random.default_rng(23)
    d = BitStream.from_bits(rng.integers(0, 2, size=l))
    assert not extract_naive(d, zero_seed).to_bits().any()
    live_seed = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    zeros = BitStream.zeros(l)
    assert not extract_naive(zeros, live_seed).to_bits().any()
    assert not extract_fft(zeros, live_seed).to_bits().any()


# ---- dual-route agreement ----

def test_fft_equals_naive_randomized():
    rng = np.random.default_rng(24)
    for _ in range(40):
        l = int(rng.integers(2, 513))
        m = int(rng.integers(1, l))
        params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
        d = BitStream.from_bits(rng.integers(0, 2, size=l))
        assert extract_fft(d, params) == extract_naive(d, params)


def test_fft_equals_naive_at_production_shape():
    rng = np.random.default_rng(25)
    l, m = 3000, 1129
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    d = BitStream.from_bits(rng.integers(0, 2, size=l))
    assert extract_fft(d, params) == extract_naive(d, params)


def test_fft_precision_guard_falls_back(monkeypatch):
    rng = np.random.default_rng(26)
    l, m = 64, 24
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    d = BitStream.from_bits(rng.integers(0, 2, size=l))
    expected = extract_naive(d, params)

    real = extractor._fft_correlate

    def corrupted(data_rows, seed_transform, n_fft, mm, workers):
        return real(data_rows, seed_transform, n_fft, mm, workers) + 0.3

    before = fft_fallback_count()
    monkeypatch.setattr(extractor, "_fft_correlate", corrupted)
    assert extract_fft(d, params) == expected
    assert fft_fallback_count() == before + 1


def test_stream_fallback_covers_all_batches(monkeypatch):
    rng = np.random.default_rng(27)
    l, m = 50, 20
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    stream = BitStream.from_bits(rng.integers(0, 2, size=7 * l))
    expected = extract_stream(stream, params)

    real = extractor._fft_correlate

    def corrupted(data_rows, seed_transform, n_fft, mm, workers):
        return real(data_rows, seed_transform, n_fft, mm, workers) + 0.3

    before = fft_fallback_count()
    monkeypatch.setattr(extractor, "_fft_correlate", corrupted)
    assert extract_stream(stream, params) == expected
    assert fft_fallback_count() == before + 7


# ---- streaming ----

def test_extract_stream_blockwise_equivalence():
    rng = np.random.default_rng(28)
    l, m = 100, 37
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    chunks = [BitStream.from_bits(rng.integers(0, 2, size=l)) for _ in range(5)]
    stream = BitStream.concat(chunks)
    got = extract_stream(stream, params)
    manual = BitStream.concat([extract_naive(c, params) for c in chunks])
    assert got == manual
    assert len(got) == 5 * m


def test_extract_stream_discards_and_logs_remainder(caplog):
    rng = np.random.default_rng(29)
    l, m = 100, 37
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    stream = BitStream.from_bits(rng.integers(0, 2, size=3 * l + 41))
    with caplog.at_level(logging.INFO, logger="qrng.extractor"):
        got = extract_stream(stream, params)
    assert len(got) == 3 * m
    assert any("discarding 41 trailing bits" in r.message for r in caplog.records)


def test_extract_stream_short_input_rejected():
    rng = np.random.default_rng(30)
    l, m = 100, 37
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    with pytest.raises(InvalidArgumentError):
        extract_stream(BitStream.zeros(l - 1), params)


def test_single_block_functions_require_exact_length():
    rng = np.random.default_rng(31)
    l, m = 100, 37
    params = params_for(l, m, rng.integers(0, 2, size=l + m - 1))
    with pytest.raises(InvalidArgumentError):
        extract_naive(BitStream.zeros(l + 1), params)
    with pytest.raises(InvalidArgumentError):
        extract_fft(BitStream.zeros(l - 1), params)


# ---- parameter sizing ----

def test_output_length_log2l_mode():
    assert compute_output_length(3000, 5.1204, 8, -100) == 1129


def test_output_length_paper_sign():
    assert compute_output_length(3000, 5.1204, 8, -100,
                                 security_sign="paper") == 1529


def test_output_length_block_mode():
    # H0 = block_bits: m = floor(3000 * 5.1204 / 8 - 200)
    assert compute_output_length(3000, 5.1204, 8, -100, h0_mode="block") == 1720


def test_output_length_small_exact():
    # floor(16 * 4 / 8 - 6) = 2
    assert compute_output_length(16, 4.0, 8, -3, h0_mode="block") == 2


def test_output_length_too_short():
    with pytest.raises(OutputTooShortError):
        compute_output_length(100, 0.5, 8, -100)


def test_output_length_validation():
    with pytest.raises(InvalidArgumentError):
        compute_output_length(0, 5.0, 8, -100)
    with pytest.raises(InvalidArgumentError):
        compute_output_length(3000, -1.0, 8, -100)
    with pytest.raises(InvalidArgumentError):
        compute_output_length(3000, 9.0, 8, -100)        # h_min > block_bits
    with pytest.raises(InvalidArgumentError):
        compute_output_length(3000, 5.0, 8, -100, h0_mode="bogus")
    with pytest.raises(InvalidArgumentError):
        compute_output_length(3000, 5.0, 8, -100, security_sign="bogus")
    with pytest.raises(InvalidArgumentError):
        compute_output_length(3000, 5.0, 8, 100)         # must be negative


def test_rate_band_brackets_reported_value():
    lo = make_rate_report(20e6, 3000, compute_output_length(3000, 5.1204, 8, -100))
    hi = make_rate_report(20e6, 3000, compute_output_length(
        3000, 5.1204, 8, -100, security_sign="paper"))
    assert lo.final_rate == pytest.approx(7.526667e6, rel=1e-6)
    assert hi.final_rate == pytest.approx(10.193333e6, rel=1e-6)
    assert lo.final_rate < 8.3e6 < hi.final_rate


def test_params_validation():
    seed4 = BitStream.from_bits([1, 0, 1, 1])
    ExtractorParams(input_len_l=3, output_len_m=2, h_min=1.0, block_bits=8,
                    epsilon_log2=-100, seed=seed4)
    with pytest.raises(InvalidArgumentError):
        ExtractorParams(input_len_l=3, output_len_m=3, h_min=1.0, block_bits=8,
                        epsilon_log2=-100, seed=BitStream.zeros(5))
    with pytest.raises(InvalidArgumentError):
        ExtractorParams(input_len_l=3, output_len_m=0, h_min=1.0, block_bits=8,
                        epsilon_log2=-100, seed=BitStream.zeros(2))
    with pytest.raises(InvalidArgumentError):
        ExtractorParams(input_len_l=3, output_len_m=2, h_min=1.0, block_bits=8,
                        epsilon_log2=-100, seed=BitStream.zeros(9))


def test_derive_seed_stream_deterministic():
    a = derive_seed_stream(7, 3000, 1129)
    b = derive_seed_stream(7, 3000, 1129)
    c = derive_seed_stream(8, 3000, 1129)
    assert len(a) == 3000 + 1129 - 1
    assert a == b
    assert a != c
    # roughly balanced
    assert abs(a.to_bits().mean() - 0.5) < 0.05


# ---- threading knob ----

def test_worker_count_explicit():
    assert worker_count(3) == 3
    assert worker_count(1) == 1


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("QRNG_THREADS", "5")
    assert worker_count() == 5
    monkeypatch.setenv("QRNG_THREADS", "0")
    assert worker_count() == (__import__("os").cpu_count() or 1)
    monkeypatch.delenv("QRNG_THREADS")
    assert worker_count() == (__import__("os").cpu_count() or 1)


def test_worker_count_zero_means_all_cores():
    assert worker_count(0) == (__import__("os").cpu_count() or 1)
    assert worker_count(-2) == (__import__("os").cpu_count() or 1)
