"""Min-entropy estimation over fixed-width blocks.

The raw stream is cut into non-overlapping blocks of block_bits bits and
the worst-case (most probable block) entropy is reported. This is the
conservative figure that sizes the extractor: h_min bits of usable
randomness per block_bits of raw data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitstream import BitStream
from .errors import InvalidArgumentError

MAX_BLOCK_BITS = 24  # bounds the frequency table at 2^24 entries


@dataclass(frozen=True)
class MinEntropyReport:
    block_bits: int
    h_min: float
    most_probable_block: int
    max_prob: float
    n_blocks: int

    def to_dict(self) -> dict:
        width = (self.block_bits + 3) // 4
        return {
            "block_bits": self.block_bits,
            "h_min": self.h_min,
            "max_prob": self.max_prob,
            "most_probable_block": f"0x{self.most_probable_block:0{width}x}",
            "n_blocks": self.n_blocks,
        }


def block_values(stream: BitStream, block_bits: int) -> np.ndarray:
    """Non-overlapping block values (first bit most significant), remainder dropped."""
    n_blocks = len(stream) // block_bits
    bits = stream.to_bits()[:n_blocks * block_bits].reshape(n_blocks, block_bits)
    words = np.zeros(n_blocks, dtype=np.int64)
    for col in range(block_bits):
        words = (words << 1) | bits[:, col]
    return words


def min_entropy(stream: BitStream, block_bits: int = 8) -> MinEntropyReport:
    """Empirical min-entropy of the stream in bits per block."""
    if not (1 <= block_bits <= MAX_BLOCK_BITS):
        raise InvalidArgumentError(
            f"block_bits must lie in [1, {MAX_BLOCK_BITS}], got {block_bits}")
    if len(stream) < block_bits:
        raise InvalidArgumentError(
            f"stream of {len(stream)} bits is shorter than one {block_bits}-bit block")
    words = block_values(stream, block_bits)
    counts = np.bincount(words, minlength=1 << block_bits)
    mode = int(np.argmax(counts))
    max_prob = float(counts[mode]) / words.size
    return MinEntropyReport(
        block_bits=block_bits,
        h_min=-math.log2(max_prob) + 0.0,  # avoid -0.0 at max_prob == 1
        most_probable_block=mode,
        max_prob=max_prob,
        n_blocks=int(words.size),
    )


def extraction_ratio(h_min: float, block_bits: int) -> float:
    """Usable randomness per raw bit: h_min / block_bits."""
    if not (0 <= h_min <= block_bits):
        raise InvalidArgumentError(
            f"h_min must lie in [0, {block_bits}], got {h_min}")
    return h_min / block_bits
