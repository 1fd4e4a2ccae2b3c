"""Shift and save evenness: clear the last mantissa bit, remember it, shift everything.

With the last bit cleared every value is even, so a single even shift that
takes the whole region one region up is exact for all of them. Each step
halves the distance of every mantissa to the top of the region, so the
number of iterations grows with ``d`` rather than with ``2**d``. The price is
one metadata bit per sample per iteration.
"""

from __future__ import annotations

import numpy as np

from .. import fp_core as fc
from ..errors import ContractError, IntegrityError, NonConvergenceError, RangeExhaustedError
from .align import align_exponents, unalign
from .base import (
    IMPLICIT_ONE,
    EvennessMetadata,
    PreprocessedDataset,
    Technique,
    check,
    check_exact_add,
    float_to_units,
    units_to_float,
)
from .evenodd import EVEN_SHIFT_UNITS, pre_shift_units, window_high

DEFAULT_MAX_ITER = 64
_ONE = np.uint64(1)


def iteration_shift(e_star: int, i: int) -> float:
    """Shift of iteration ``i`` (0-based): ``2**(e+1) - 2 ulps`` of region ``e* + i``."""
    return units_to_float(IMPLICIT_ONE + EVEN_SHIFT_UNITS, e_star + i)


def leading_ones(mantissa: int) -> int:
    """How many leading mantissa bits are 1."""
    inv = ~mantissa & fc.MANTISSA_MASK
    return fc.MANTISSA_BITS - inv.bit_length()


def save_evenness_forward(
    ds, d: int, *, max_iter: int = DEFAULT_MAX_ITER, checked: bool = False
) -> PreprocessedDataset:
    if not 1 <= d <= fc.MANTISSA_BITS:
        raise ContractError(f"d={d} outside [1, 52]")
    aligned, record = align_exponents(ds)
    out = aligned.copy()
    n = out.size
    nz = np.flatnonzero(aligned != 0)
    e = record.reference_e_star
    if nz.size == 0:
        return PreprocessedDataset(out, Technique.EVENNESS, EvennessMetadata(d, e, 0.0, 0, n, (), record))

    ws = fc.top_window_start(d)
    mant = fc.mantissas(out[nz])
    s = pre_shift_units(int(mant.min()), int(mant.max()), window_high(d))
    a_align = units_to_float(s, e)
    if s:
        x = out[nz]
        y = x + a_align
        if checked:
            check_exact_add(x, a_align, y, "alignment shift")
            check(np.all(fc.regions(y) == e), "alignment shift left the region")
        out[nz] = y

    bitmaps: list[bytes] = []
    lowest = int(fc.mantissas(out[nz]).min())
    while lowest < ws:
        if len(bitmaps) >= max_iter:
            raise NonConvergenceError(
                f"evenness did not reach d={d} within {max_iter} iterations (max feasible d={leading_ones(lowest)})",
                max_feasible_d=leading_ones(lowest),
            )
        cur = e + len(bitmaps)
        if cur + 1 > fc.E_MAX:
            raise RangeExhaustedError(f"iteration {len(bitmaps) + 1} would leave the largest exponent region")
        bits = fc.as_bits(out[nz])
        lsb = np.zeros(n, dtype=np.uint8)
        lsb[nz] = (bits & _ONE).astype(np.uint8)
        bitmaps.append(np.packbits(lsb).tobytes())
        x_even = fc.bits_to_floats(bits & ~_ONE)
        shift = iteration_shift(e, len(bitmaps) - 1)
        y = x_even + shift
        if checked:
            check_exact_add(x_even, shift, y, "evenness")
            check(np.all(fc.regions(y) == cur + 1), "evenness step did not land one region up")
        out[nz] = y
        new_lowest = int(fc.mantissas(y).min())
        if new_lowest <= lowest:
            raise NonConvergenceError(
                f"evenness stalled before d={d} (max feasible d={leading_ones(new_lowest)})",
                max_feasible_d=leading_ones(new_lowest),
            )
        lowest = new_lowest

    if checked:
        check(fc.leading_bits_agree(out[nz], d), f"values do not share {d} leading bits")
    meta = EvennessMetadata(d, e, a_align, len(bitmaps), n, tuple(bitmaps), record)
    return PreprocessedDataset(out, Technique.EVENNESS, meta)


def save_evenness_inverse(pd: PreprocessedDataset, *, checked: bool = False) -> np.ndarray:
    md = pd.metadata
    if not isinstance(md, EvennessMetadata):
        raise IntegrityError("metadata is not evenness metadata")
    vals = pd.values.copy()
    n = vals.size
    if md.n != n:
        raise IntegrityError(f"metadata describes {md.n} samples, dataset has {n}")
    if len(md.evenness_bits) != md.iteration_count:
        raise IntegrityError("bitmap count does not match the iteration count")
    nbytes = -(-n // 8)
    if any(len(b) != nbytes for b in md.evenness_bits):
        raise IntegrityError(f"each bitmap must hold exactly {n} bits")
    nz = np.flatnonzero(vals != 0)
    if nz.size == 0:
        return unalign(vals, md.alignment)
    e = md.e_star
    if md.iteration_count and np.any(fc.regions(vals[nz]) != e + md.iteration_count):
        raise IntegrityError("transformed values are not in the final region")
    for i in range(md.iteration_count - 1, -1, -1):
        shift = iteration_shift(e, i)
        y = vals[nz]
        x_even = y - shift
        if checked:
            check_exact_add(x_even, shift, y, "evenness inverse")
        if np.any(fc.regions(x_even) != e + i):
            raise IntegrityError(f"inverse step {i + 1} left the expected region")
        lsb = np.unpackbits(np.frombuffer(md.evenness_bits[i], dtype=np.uint8), count=n)[nz].astype(np.uint64)
        vals[nz] = fc.bits_to_floats(fc.as_bits(x_even) | lsb)
    if md.a_align:
        try:
            float_to_units(md.a_align, e)
        except (ValueError, OverflowError):
            raise IntegrityError("alignment shift is not on the region's ulp grid") from None
        vals[nz] = vals[nz] - md.a_align
        if np.any(vals[nz] <= 0) or np.any(fc.regions(vals[nz]) != e):
            raise IntegrityError("alignment shift moved values out of the reference region")
    return unalign(vals, md.alignment)
