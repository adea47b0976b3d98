"""Worst-case entropy estimation on block histograms."""
import numpy as np
import pytest

from qrng.bitstream import BitStream
from qrng.entropy import block_values, extraction_ratio, min_entropy
from qrng.errors import InvalidArgumentError


def stream_of_bytes(values):
    return BitStream(np.asarray(values, dtype=np.uint8), 8 * len(values))


def test_block_values_msb_first():
    s = BitStream.from_bits([1, 0, 1, 1, 0, 1, 0, 0,
                             0, 0, 0, 0, 1, 1, 1, 1])
    assert block_values(s, 8).tolist() == [0xB4, 0x0F]
    assert block_values(s, 4).tolist() == [0xB, 0x4, 0x0, 0xF]
    assert block_values(s, 16).tolist() == [0xB40F]


def test_block_values_drops_remainder():
    s = BitStream.from_bits([1, 1, 1, 1, 0, 0, 0, 0, 1, 0, 1])
    assert block_values(s, 8).tolist() == [0xF0]


def test_constant_stream_has_zero_entropy():
    report = min_entropy(BitStream.zeros(8000), 8)
    assert report.h_min == 0.0
    assert report.max_prob == 1.0
    assert report.most_probable_block == 0
    assert report.n_blocks == 1000
    ones = BitStream.from_bits(np.ones(800, dtype=np.uint8))
    assert min_entropy(ones, 8).h_min == 0.0
    assert min_entropy(ones, 8).most_probable_block == 0xFF


def test_four_equally_likely_bytes_give_two_bits():
    values = [0x11, 0x22, 0x33, 0x44] * 250
    report = min_entropy(stream_of_bytes(values), 8)
    assert report.h_min == pytest.approx(2.0, abs=1e-12)
    assert report.max_prob == pytest.approx(0.25, abs=1e-15)


def test_all_bytes_equally_likely_give_eight_bits():
    values = list(range(256)) * 5
    report = min_entropy(stream_of_bytes(values), 8)
    assert report.h_min == pytest.approx(8.0, abs=1e-12)
    assert report.max_prob == pytest.approx(1 / 256, abs=1e-15)
    assert report.n_blocks == 1280


def test_alternating_bits_have_zero_block_entropy():
    s = BitStream.from_bits([0, 1] * 512)
    report = min_entropy(s, 8)
    assert report.h_min == 0.0
    assert report.most_probable_block == 0x55


def test_block_order_permutation_invariance():
    rng = np.random.default_rng(7)
    values = rng.integers(0, 256, size=4096)
    base = min_entropy(stream_of_bytes(values), 8)
    shuffled = min_entropy(stream_of_bytes(rng.permutation(values)), 8)
    assert shuffled.h_min == base.h_min
    assert shuffled.max_prob == base.max_prob


def test_aligned_self_concatenation_preserves_estimate():
    rng = np.random.default_rng(8)
    values = rng.integers(0, 256, size=1024)
    s = stream_of_bytes(values)
    doubled = BitStream.concat([s, s])
    a, b = min_entropy(s, 8), min_entropy(doubled, 8)
    assert b.h_min == a.h_min
    assert b.max_prob == a.max_prob
    assert b.most_probable_block == a.most_probable_block
    assert b.n_blocks == 2 * a.n_blocks


def test_bias_lowers_entropy_when_mode_is_minority():
    # fair bits vs 60/40 bias: the biased mode byte is likelier, so the
    # worst-case estimate must drop
    rng = np.random.default_rng(9)
    n = 400_000
    fair = BitStream.from_bits(rng.integers(0, 2, size=n))
    biased = BitStream.from_bits((rng.random(n) < 0.6).astype(np.uint8))
    fair_rep, biased_rep = min_entropy(fair, 8), min_entropy(biased, 8)
    assert fair_rep.max_prob < 0.5 and biased_rep.max_prob < 0.5
    assert biased_rep.h_min < fair_rep.h_min


def test_fair_megabit_scores_high():
    rng = np.random.default_rng(10)
    s = BitStream.from_bits(rng.integers(0, 2, size=1_000_000))
    assert min_entropy(s, 8).h_min >= 7.5


def test_non_byte_block_sizes():
    rng = np.random.default_rng(11)
    s = BitStream.from_bits(rng.integers(0, 2, size=120_000))
    for bb in (1, 3, 12):
        report = min_entropy(s, bb)
        assert 0 < report.h_min <= bb
        assert report.n_blocks == 120_000 // bb


def test_report_dict_hex_rendering():
    values = [0xAB] * 100
    d = min_entropy(stream_of_bytes(values), 8).to_dict()
    assert d["most_probable_block"] == "0xab"
    assert d["h_min"] == 0.0
    d12 = min_entropy(stream_of_bytes(values), 12).to_dict()
    assert d12["most_probable_block"] == "0xaba"


def test_block_bits_gates():
    s = BitStream.zeros(64)
    with pytest.raises(InvalidArgumentError):
        min_entropy(s, 0)
    with pytest.raises(InvalidArgumentError):
        min_entropy(s, 25)
    with pytest.raises(InvalidArgumentError):
        min_entropy(BitStream.zeros(7), 8)   # shorter than one block


def test_extraction_ratio():
    assert extraction_ratio(5.12, 8) == pytest.approx(0.64, rel=1e-15)
    assert extraction_ratio(0.0, 8) == 0.0
    assert extraction_ratio(8.0, 8) == 1.0
    with pytest.raises(InvalidArgumentError):
        extraction_ratio(8.1, 8)
    with pytest.raises(InvalidArgumentError):
        extraction_ratio(-0.1, 8)
