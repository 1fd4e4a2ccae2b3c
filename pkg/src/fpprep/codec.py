"""Binary container for preprocessed datasets.

Layout (little-endian throughout)::

    b"FPP1" | technique u8 | n u64 | metadata block | n x f64

The high bit of the technique byte flags an alignment block at the start of
the metadata: reference region i16, smallest delta i16, delta width u8, then
the per-sample deltas bit-packed MSB first. Datasets that were already in one
region carry no alignment block at all.

Technique blocks:

* bins: k x f64 shifts, then k-1 boundaries of ceil(log2 ell) bits each.
  Neither k nor ell is stored; ell comes from the value block and k from
  the block length.
* mulshift: d u8, e* i16, a_1 f64, iterations u16
* evenodd: d u8, e* i16, a_align f64, w_0 f64, iterations u16
* evenness: d u8, e* i16, a_align f64, iterations u16, then one
  ceil(n/8)-byte bitmap per iteration
* identity: empty
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .errors import BadMagicError, LengthMismatchError, TruncatedError, UnknownTechniqueError
from .transforms.base import (
    AlignmentRecord,
    CompactBinsMetadata,
    EvennessMetadata,
    EvenOddSeparateMetadata,
    IdentityMetadata,
    MultiplyShiftMetadata,
    PreprocessedDataset,
    Technique,
)

MAGIC = b"FPP1"
HEADER = struct.Struct("<4sBQ")
ALIGN_FLAG = 0x80
_ALIGN_HEAD = struct.Struct("<hhB")
_MULSHIFT = struct.Struct("<BhdH")
_EVENODD = struct.Struct("<BhddH")
_EVENNESS = struct.Struct("<BhdH")


# -- bit packing ----------------------------------------------------------


def pack_uints(values, width: int) -> bytes:
    """Pack non-negative ints into ``width`` bits each, MSB first, padded to a byte."""
    v = np.asarray(values, dtype=np.uint64).reshape(-1)
    if width == 0 or v.size == 0:
        return b""
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((v[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1)).tobytes()


def unpack_uints(buf: bytes, count: int, width: int) -> np.ndarray:
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.uint64)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), count=count * width)
    weights = np.uint64(1) << np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (bits.reshape(count, width).astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def packed_len(count: int, width: int) -> int:
    return -(-count * width // 8)


def bins_block_len(k: int, ell: int) -> int:
    b = math.ceil(math.log2(ell)) if ell > 1 else 0
    return -(-(64 * k + (k - 1) * b) // 8)


# -- encode ---------------------------------------------------------------


def _encode_alignment(rec: AlignmentRecord) -> bytes:
    deltas = np.asarray(rec.deltas, dtype=np.int64)
    lo = int(deltas.min())
    width = int(deltas.max() - lo).bit_length()
    return _ALIGN_HEAD.pack(rec.reference_e_star, lo, width) + pack_uints(deltas - lo, width)


def _encode_metadata(md, n: int) -> bytes:
    if isinstance(md, IdentityMetadata):
        return b""
    if isinstance(md, CompactBinsMetadata):
        shifts = struct.pack(f"<{md.k}d", *md.shifts)
        return shifts + pack_uints(md.boundaries, md.boundary_bits)
    if isinstance(md, MultiplyShiftMetadata):
        return _MULSHIFT.pack(md.d, md.alignment.reference_e_star, md.a_1, md.iteration_count)
    if isinstance(md, EvenOddSeparateMetadata):
        return _EVENODD.pack(md.d, md.e_star, md.a_align, md.w_0, md.iteration_count)
    if isinstance(md, EvennessMetadata):
        return _EVENNESS.pack(md.d, md.e_star, md.a_align, md.iteration_count) + b"".join(md.evenness_bits)
    raise TypeError(f"unknown metadata type {type(md).__name__}")


def encode(pd: PreprocessedDataset) -> bytes:
    n = pd.values.size
    tech = int(pd.technique)
    align = getattr(pd.metadata, "alignment", None)
    head = b""
    if align is not None and not align.is_identity:
        tech |= ALIGN_FLAG
        head = _encode_alignment(align)
    body = _encode_metadata(pd.metadata, n)
    values = pd.values.astype("<f8").tobytes()
    return HEADER.pack(MAGIC, tech, n) + head + body + values


def metadata_size_bytes(pd: PreprocessedDataset) -> int:
    """Bytes of the metadata block alone (no header, no values)."""
    return len(encode(pd)) - HEADER.size - 8 * pd.values.size


# -- decode ---------------------------------------------------------------


class _Reader:
    def __init__(self, buf: bytes, start: int, end: int):
        self.buf, self.pos, self.end = buf, start, end

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > self.end:
            raise TruncatedError(f"container truncated inside {what}")
        out = self.buf[self.pos : self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: struct.Struct, what: str):
        return fmt.unpack(self.take(fmt.size, what))

    @property
    def remaining(self) -> int:
        return self.end - self.pos


def _default_alignment(e_star: int, values: np.ndarray) -> AlignmentRecord:
    n = values.size
    return AlignmentRecord(e_star, (0,) * n, np.packbits(values == 0).tobytes())


def decode(data: bytes) -> PreprocessedDataset:
    data = bytes(data)
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError("not an FPP1 container")
    if len(data) < HEADER.size:
        raise TruncatedError("container shorter than its header")
    _, tech_byte, n = HEADER.unpack_from(data)
    has_align = bool(tech_byte & ALIGN_FLAG)
    tech_id = tech_byte & ~ALIGN_FLAG
    try:
        tech = Technique(tech_id)
    except ValueError:
        raise UnknownTechniqueError(f"unknown technique id {tech_id}") from None
    values_len = 8 * n
    if len(data) < HEADER.size + values_len:
        raise TruncatedError(f"container declares {n} values but holds {len(data) - HEADER.size} bytes after the header")
    values = np.frombuffer(data[len(data) - values_len :], dtype="<f8").astype(np.float64)
    r = _Reader(data, HEADER.size, len(data) - values_len)

    alignment = None
    if has_align:
        if tech in (Technique.IDENTITY, Technique.BINS):
            raise LengthMismatchError(f"{tech.cli_name} containers carry no alignment block")
        e_ref, lo, width = r.unpack(_ALIGN_HEAD, "alignment header")
        packed = r.take(packed_len(n, width), "alignment deltas")
        deltas = unpack_uints(packed, n, width).astype(np.int64) + lo
        alignment = AlignmentRecord(e_ref, tuple(deltas.tolist()), np.packbits(values == 0).tobytes())

    if tech is Technique.IDENTITY:
        md = IdentityMetadata()
    elif tech is Technique.BINS:
        md = _decode_bins(r, values)
    elif tech is Technique.MULSHIFT:
        d, e_star, a_1, t = r.unpack(_MULSHIFT, "multiply-shift block")
        md = MultiplyShiftMetadata(d, a_1, t, alignment or _default_alignment(e_star, values))
    elif tech is Technique.EVENODD:
        d, e_star, a_align, w_0, t = r.unpack(_EVENODD, "even/odd block")
        md = EvenOddSeparateMetadata(d, e_star, a_align, w_0, t, alignment or _default_alignment(e_star, values))
    else:
        d, e_star, a_align, t = r.unpack(_EVENNESS, "evenness block")
        nbytes = -(-n // 8)
        bitmaps = tuple(r.take(nbytes, f"evenness bitmap {i + 1}") for i in range(t))
        md = EvennessMetadata(d, e_star, a_align, t, n, bitmaps, alignment or _default_alignment(e_star, values))
    if r.remaining:
        raise LengthMismatchError(f"{r.remaining} unexpected bytes in the metadata block")
    return PreprocessedDataset(values, tech, md)


def _decode_bins(r: _Reader, values: np.ndarray) -> CompactBinsMetadata:
    nz = values[values != 0]
    ell = max(1, np.unique(nz).size)
    size = r.remaining
    if size < 8:
        raise TruncatedError("bins block shorter than one shift")
    k = size // 8
    while k > 1 and bins_block_len(k, ell) > size:
        k -= 1
    if bins_block_len(k, ell) != size:
        raise LengthMismatchError(f"bins block of {size} bytes matches no bin count for {ell} unique values")
    shifts = struct.unpack(f"<{k}d", r.take(8 * k, "bin shifts"))
    md = CompactBinsMetadata(shifts, (), ell)
    packed = r.take(r.remaining, "bin boundaries")
    boundaries = unpack_uints(packed, k - 1, md.boundary_bits)
    return CompactBinsMetadata(shifts, tuple(int(b) for b in boundaries), ell)
