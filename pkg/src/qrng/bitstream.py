"""Packed bit sequences and their on-disk format.

A BitStream is the currency between every stage: raw simulator output,
extractor seeds, and extracted output all use it. Bits are packed eight
per byte with the first bit of the stream in the most significant bit of
byte 0; trailing pad bits of the final byte are always zero.

File format: a 16 byte header (magic "TRNG", version u16, bit length u64,
2 reserved bytes, little endian) followed by the packed payload. External
test suites consume the payload alone, so writers can omit the header.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import FileFormatError, InvalidArgumentError

_HEADER = struct.Struct("<4sHQ2s")
MAGIC = b"TRNG"
VERSION = 1
HEADER_BYTES = _HEADER.size  # 16


def _check_padding(packed: np.ndarray, length: int) -> None:
    pad = 8 * packed.size - length
    if pad and packed.size:
        mask = (1 << pad) - 1
        if int(packed[-1]) & mask:
            raise InvalidArgumentError("trailing pad bits must be zero")


class BitStream:
    """Immutable packed bit sequence of known length."""

    __slots__ = ("_packed", "_length")

    def __init__(self, packed, length: int):
        packed = np.asarray(packed, dtype=np.uint8)
        if packed.ndim != 1:
            raise InvalidArgumentError("packed data must be one-dimensional")
        length = int(length)
        if length < 0 or packed.size != (length + 7) // 8:
            raise InvalidArgumentError(
                f"packed size {packed.size} does not hold exactly {length} bits")
        _check_padding(packed, length)
        packed = packed.copy()
        packed.setflags(write=False)
        self._packed = packed
        self._length = length

    @classmethod
    def from_bits(cls, bits) -> "BitStream":
        """Pack an array of 0/1 values."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size and bits.max(initial=0) > 1:
            raise InvalidArgumentError("bit values must be 0 or 1")
        return cls(np.packbits(bits), bits.size)

    @classmethod
    def zeros(cls, length: int) -> "BitStream":
        return cls(np.zeros((int(length) + 7) // 8, dtype=np.uint8), length)

    @classmethod
    def concat(cls, streams) -> "BitStream":
        streams = list(streams)
        if not streams:
            return cls.zeros(0)
        # byte-aligned pieces concatenate without repacking
        if all(len(s) % 8 == 0 for s in streams[:-1]):
            packed = np.concatenate([s._packed for s in streams])
            return cls(packed, sum(len(s) for s in streams))
        bits = np.concatenate([s.to_bits() for s in streams])
        return cls.from_bits(bits)

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    @property
    def length(self) -> int:
        return self._length

    def __len__(self) -> int:
        return self._length

    def to_bits(self) -> np.ndarray:
        """Unpack to a uint8 array of 0/1 values, padding removed."""
        return np.unpackbits(self._packed, count=self._length)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return (self._length == other._length
                and np.array_equal(self._packed, other._packed))

    def __hash__(self):
        return hash((self._length, self._packed.tobytes()))

    def __repr__(self) -> str:
        return f"BitStream(length={self._length})"

    # ---- file I/O ----

    def to_file(self, path, headerless: bool = False) -> None:
        with open(path, "wb") as fh:
            if not headerless:
                fh.write(_HEADER.pack(MAGIC, VERSION, self._length, b"\x00\x00"))
            fh.write(self._packed.tobytes())

    @classmethod
    def from_file(cls, path, headerless: bool = False) -> "BitStream":
        with open(path, "rb") as fh:
            raw = fh.read()
        if headerless:
            payload = np.frombuffer(raw, dtype=np.uint8)
            return cls(payload, 8 * payload.size)
        if len(raw) < HEADER_BYTES:
            raise FileFormatError(f"{path}: truncated header")
        magic, version, length, _ = _HEADER.unpack(raw[:HEADER_BYTES])
        if magic != MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        payload = np.frombuffer(raw, dtype=np.uint8, offset=HEADER_BYTES)
        if payload.size != (length + 7) // 8:
            raise FileFormatError(
                f"{path}: payload holds {payload.size} bytes, "
                f"expected {(length + 7) // 8} for {length} bits")
        try:
            return cls(payload, length)
        except InvalidArgumentError as exc:
            raise FileFormatError(f"{path}: {exc}") from exc

    def to_ascii_file(self, path) -> None:
        """One '0'/'1' character per bit, no separators."""
        chars = self.to_bits() + np.uint8(ord("0"))
        with open(path, "wb") as fh:
            fh.write(chars.tobytes())
