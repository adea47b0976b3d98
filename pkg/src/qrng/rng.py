"""Counter-based deterministic random number generation.

Built on numpy's Philox bit generator, which is a pure function of
(key, counter). `uniform_block` addresses the stream by absolute draw
index, so any partitioning of [0, n) into blocks reproduces the exact
doubles a single serial pass would produce. That property is what makes
chunked (and potentially parallel) simulation bit-identical to serial.
"""
import numpy as np


def uniform_block(seed: int, start: int, count: int) -> np.ndarray:
    """Return doubles number `start` .. `start+count-1` of the stream keyed by `seed`.

    Each double consumes exactly one 64-bit Philox output. Philox counts in
    blocks of four outputs, so we advance to the enclosing block and discard
    the within-block remainder.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    bg = np.random.Philox(key=np.uint64(seed))
    bg.advance(start >> 2)
    gen = np.random.Generator(bg)
    pre = start & 3
    if pre:
        gen.random(pre)
    return gen.random(count)


def random_bits(seed: int, count: int) -> np.ndarray:
    """Deterministic unbiased bit array (uint8 values 0/1) keyed by `seed`."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    gen = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    return gen.integers(0, 2, size=count, dtype=np.uint8)


def derive_seed(seed: int, index: int) -> int:
    """Derive an independent child seed, e.g. one per sweep point."""
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])
