from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpprep import fp_core as fc
from fpprep.errors import (
    BadMagicError,
    ContractError,
    EmptyInputError,
    IntegrityError,
    LengthMismatchError,
    TruncatedError,
)
from fpprep.gd import HEADER, GdArchive, compression_ratio, gd_compress, gd_decompress


def same_bits(a, b):
    return np.array_equal(fc.as_bits(a), fc.as_bits(b))


def test_header_is_31_bytes():
    assert HEADER.size == 31


@pytest.mark.parametrize("n", [1, 10, 1000])
def test_constant_dataset_width_zero(n):
    a = gd_compress(np.full(n, 3.25))
    assert a.deviation_width == 0 and a.deviations == b""
    assert a.size_bytes == 31
    assert same_bits(gd_decompress(a), np.full(n, 3.25))


def test_two_values_one_bit():
    a = gd_compress([1.0, 1.5])
    assert a.deviation_width == 1
    assert len(a.deviations) == 1
    assert same_bits(gd_decompress(a), np.array([1.0, 1.5]))


def test_random_round_trip():
    rng = np.random.default_rng(5)
    x = rng.normal(0, 1e5, 5000)
    a = gd_compress(x)
    assert same_bits(gd_decompress(GdArchive.from_bytes(a.to_bytes())), x)


def test_nan_payloads_round_trip():
    pats = np.array([0x7FF8000000000001, 0xFFF0000000000ABC, 0x7FF0000000000000, 0], dtype=np.uint64)
    x = pats.view(np.float64)
    out = gd_decompress(GdArchive.from_bytes(gd_compress(x).to_bytes()))
    assert np.array_equal(fc.as_bits(out), pats)


@pytest.mark.parametrize("comp", ["none", "zlib", "bz2", "lzma"])
def test_byte_compressors(comp):
    x = np.round(np.random.default_rng(1).uniform(2, 128, 2000), 2)
    a = gd_compress(x, comp)
    back = GdArchive.from_bytes(a.to_bytes())
    assert back == a
    assert same_bits(gd_decompress(back), x)


def test_size_strictly_decreasing_in_shared_bits():
    rng = np.random.default_rng(3)
    n = 256
    sizes = []
    for free in range(64, 0, -1):
        # random patterns varying only in the lowest `free` bits
        pats = rng.integers(0, 2**63, n, dtype=np.uint64)
        mask = np.uint64((1 << free) - 1) if free < 64 else np.uint64(2**64 - 1)
        pats = (pats & mask) | np.uint64(0x3FF0000000000000 & ~int(mask) & (2**64 - 1))
        pats[0] &= ~np.uint64(1 << (free - 1))
        pats[1] |= np.uint64(1 << (free - 1))
        a = gd_compress(pats.view(np.float64))
        assert a.deviation_width == 64 - fc.shared_bits(pats.view(np.float64)).s_tot
        sizes.append(a.size_bytes)
    assert all(b < a for a, b in zip(sizes, sizes[1:]))


def test_compression_ratio():
    assert compression_ratio(6400, 0, 64000) == Fraction(1, 10)
    with pytest.raises(ContractError):
        compression_ratio(1, 0, 0)


def test_constant_1000_far_below_one():
    a = gd_compress(np.full(1000, 7.5))
    assert compression_ratio(8 * a.size_bytes, 0, 64000) < Fraction(1, 100)


def test_incompressible_at_least_one():
    pats = np.random.default_rng(8).integers(0, 2**64, 1000, dtype=np.uint64, endpoint=False)
    pats[0], pats[1] = 0, 2**64 - 1
    a = gd_compress(pats.view(np.float64))
    assert compression_ratio(8 * a.size_bytes, 0, 64000) >= 1


def test_empty_input():
    with pytest.raises(EmptyInputError):
        gd_compress([])


def test_integrity_errors():
    blob = gd_compress([1.0, 1.5, 1.75]).to_bytes()
    with pytest.raises(BadMagicError):
        GdArchive.from_bytes(b"NOPE" + blob[4:])
    with pytest.raises(TruncatedError):
        GdArchive.from_bytes(blob[:20])
    with pytest.raises(TruncatedError):
        GdArchive.from_bytes(blob[:-1])
    with pytest.raises(LengthMismatchError):
        GdArchive.from_bytes(blob + b"\0")
    bad = bytearray(blob)
    bad[5] = 77
    with pytest.raises(IntegrityError):
        GdArchive.from_bytes(bytes(bad))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 2**64 - 1), min_size=1, max_size=50))
def test_round_trip_any_patterns(pats):
    bits = np.array(pats, dtype=np.uint64)
    out = gd_decompress(GdArchive.from_bytes(gd_compress(bits.view(np.float64)).to_bytes()))
    assert np.array_equal(fc.as_bits(out), bits)
