"""Single-base generalized deduplication over shared bit positions.

Every value is split into the bits all values agree on (stored once, as a
mask and a base pattern) and its remaining deviation bits, which are
bit-packed back to back. The more bits a dataset shares, the smaller the
archive, which is exactly the quantity the preprocessing techniques raise.

Archive layout (little-endian)::

    b"FPGD" | version u8 | byte compressor id u8 | mask u64 | base u64
    | n u64 | deviation width u8 | deviations

The deviation block is ``ceil(n * width / 8)`` bytes, optionally run through
a general-purpose byte compressor afterwards.
"""

from __future__ import annotations

import bz2
import lzma
import struct
import zlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import fp_core as fc
from .errors import (
    BadMagicError,
    ContractError,
    EmptyInputError,
    IntegrityError,
    LengthMismatchError,
    TruncatedError,
)

MAGIC = b"FPGD"
VERSION = 1
HEADER = struct.Struct("<4sBBQQQB")


@dataclass(frozen=True)
class ByteCompressor:
    name: str
    ident: int
    compress: Callable[[bytes], bytes]
    decompress: Callable[[bytes], bytes]


BYTE_COMPRESSORS: dict[str, ByteCompressor] = {
    c.name: c
    for c in (
        ByteCompressor("none", 0, bytes, bytes),
        ByteCompressor("zlib", 1, lambda b: zlib.compress(b, 9), zlib.decompress),
        ByteCompressor("bz2", 2, lambda b: bz2.compress(b, 9), bz2.decompress),
        ByteCompressor("lzma", 3, lzma.compress, lzma.decompress),
    )
}
_BY_ID = {c.ident: c for c in BYTE_COMPRESSORS.values()}


@dataclass(frozen=True)
class GdArchive:
    shared_mask: int
    shared_value: int
    n: int
    deviation_width: int
    deviations: bytes  # packed, before any byte compressor
    byte_compressor: str = "none"

    def to_bytes(self) -> bytes:
        comp = BYTE_COMPRESSORS[self.byte_compressor]
        head = HEADER.pack(
            MAGIC, VERSION, comp.ident, self.shared_mask, self.shared_value, self.n, self.deviation_width
        )
        return head + comp.compress(self.deviations)

    @classmethod
    def from_bytes(cls, data: bytes) -> "GdArchive":
        data = bytes(data)
        if data[:4] != MAGIC:
            raise BadMagicError("not an FPGD archive")
        if len(data) < HEADER.size:
            raise TruncatedError("archive shorter than its header")
        _, version, comp_id, mask, value, n, width = HEADER.unpack_from(data)
        if version != VERSION:
            raise IntegrityError(f"unsupported archive version {version}")
        if comp_id not in _BY_ID:
            raise IntegrityError(f"unknown byte compressor id {comp_id}")
        comp = _BY_ID[comp_id]
        if width != 64 - bin(mask).count("1"):
            raise IntegrityError("deviation width disagrees with the shared mask")
        if value & ~mask:
            raise IntegrityError("base pattern has bits outside the shared mask")
        try:
            dev = comp.decompress(data[HEADER.size :])
        except Exception as exc:  # each byte compressor raises its own error type
            raise IntegrityError(f"deviation block does not decompress: {exc}") from None
        want = -(-n * width // 8)
        if len(dev) < want:
            raise TruncatedError(f"deviation block holds {len(dev)} bytes, {want} expected")
        if len(dev) > want:
            raise LengthMismatchError(f"deviation block holds {len(dev)} bytes, {want} expected")
        return cls(mask, value, n, width, dev, comp.name)

    @property
    def size_bytes(self) -> int:
        return len(self.to_bytes())


def _bit_matrix(bits: np.ndarray) -> np.ndarray:
    """n x 64 matrix of pattern bits, most significant first."""
    be = bits.astype(">u8").view(np.uint8).reshape(-1, 8)
    return np.unpackbits(be, axis=1)


def _free_columns(mask: int) -> np.ndarray:
    return np.array([i for i in range(64) if not (mask >> (63 - i)) & 1], dtype=np.intp)


def gd_compress(values, byte_compressor: str = "none") -> GdArchive:
    bits = fc.as_bits(values)
    if bits.size == 0:
        raise EmptyInputError("cannot compress an empty dataset")
    if byte_compressor not in BYTE_COMPRESSORS:
        raise ContractError(f"unknown byte compressor {byte_compressor!r}")
    summary = fc.shared_bits(bits.view(np.float64))
    cols = _free_columns(summary.shared_mask)
    dev = np.packbits(_bit_matrix(bits)[:, cols].reshape(-1)).tobytes() if cols.size else b""
    return GdArchive(summary.shared_mask, summary.shared_value, bits.size, int(cols.size), dev, byte_compressor)


def gd_decompress(a: GdArchive) -> np.ndarray:
    if a.deviation_width != 64 - bin(a.shared_mask).count("1"):
        raise IntegrityError("deviation width disagrees with the shared mask")
    if len(a.deviations) != -(-a.n * a.deviation_width // 8):
        raise LengthMismatchError("deviation block length disagrees with n and width")
    base = np.full(a.n, a.shared_value, dtype=np.uint64)
    cols = _free_columns(a.shared_mask)
    if cols.size:
        dev = np.unpackbits(np.frombuffer(a.deviations, dtype=np.uint8), count=a.n * cols.size)
        dev = dev.reshape(a.n, cols.size).astype(np.uint64)
        weights = np.uint64(1) << (63 - cols).astype(np.uint64)
        base |= (dev * weights).sum(axis=1, dtype=np.uint64)
    return fc.bits_to_floats(base).copy()


def compression_ratio(compressed_bits: int, metadata_bits: int, original_bits: int) -> Fraction:
    """``(compressed + metadata) / original`` as an exact rational."""
    if original_bits <= 0:
        raise ContractError("original size must be positive")
    return Fraction(compressed_bits + metadata_bits, original_bits)
