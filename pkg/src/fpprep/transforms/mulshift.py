"""Multiply and shift: ``y = 2x + A`` on values outside the top ``d``-bit window.

Doubling moves a value one region up with its mantissa intact. The shift then
adds just under ``2**(52-d)`` ulps of the new region, so a value that was at
most that far below the window start lands inside it. Values still outside
go round again one region higher, where the shift is simply doubled.
"""

from __future__ import annotations

import math

import numpy as np

from .. import fp_core as fc
from ..errors import (
    ContractError,
    InfeasibleShiftError,
    IntegrityError,
    NonConvergenceError,
    RangeExhaustedError,
)
from .align import align_exponents, unalign
from .base import (
    MultiplyShiftMetadata,
    PreprocessedDataset,
    Technique,
    check,
    check_exact_add,
    check_within_region_shift,
)

DEFAULT_MAX_ITER = 64


def first_shift(e_star: int, d: int) -> float | None:
    """Shift for values of region ``e_star`` after doubling, or None if no lossless one exists."""
    raw = math.ldexp(1.0, e_star + 1 - d) - 2 * fc.ulp(math.ldexp(1.0, e_star + 1))
    if raw <= 0:
        return None
    return fc.round_down_within_region(raw, e_star + 1)


def multiply_shift_forward(
    ds, d: int, *, max_iter: int = DEFAULT_MAX_ITER, checked: bool = False
) -> PreprocessedDataset:
    if not 1 <= d <= fc.MANTISSA_BITS:
        raise ContractError(f"d={d} outside [1, 52]")
    aligned, record = align_exponents(ds)
    out = aligned.copy()
    nz = np.flatnonzero(aligned != 0)
    if nz.size == 0:
        return PreprocessedDataset(out, Technique.MULSHIFT, MultiplyShiftMetadata(d, 0.0, 0, record))
    e = record.reference_e_star
    ws = fc.top_window_start(d)
    a_1 = first_shift(e, d) if e < fc.E_MAX else None

    active = nz[fc.mantissas(out[nz]) < ws]
    shift = a_1
    t = 0
    while active.size:
        if e + t + 1 > fc.E_MAX:
            raise RangeExhaustedError(f"iteration {t + 1} would leave the largest exponent region")
        if a_1 is None:
            raise InfeasibleShiftError(f"no lossless shift reaches a {d}-bit window")
        if t >= max_iter:
            raise NonConvergenceError(f"multiply-shift did not converge within {max_iter} iterations", max_feasible_d=None)
        x = out[active]
        doubled = 2.0 * x
        y = doubled + shift
        if checked:
            check_within_region_shift(shift, e + t + 1)
            check(np.all(fc.regions(y) == e + t + 1), "multiply-shift left its target region")
            check_exact_add(doubled, shift, y, "multiply-shift")
            if x.size > 1:
                before = float(x.max() - x.min())
                after = float(doubled.max() - doubled.min())
                check(after <= 2.0 * before + 4 * fc.ulp(after or 1.0), "window grew more than twofold")
        out[active] = y
        active = active[fc.mantissas(y) < ws]
        shift *= 2.0
        t += 1

    if checked:
        for r in np.unique(fc.regions(out[nz])):
            sel = out[nz][fc.regions(out[nz]) == r]
            check(fc.leading_bits_agree(sel, d), f"region {r} does not share {d} leading bits")
    meta = MultiplyShiftMetadata(d, a_1 if a_1 is not None else 0.0, t, record)
    return PreprocessedDataset(out, Technique.MULSHIFT, meta)


def multiply_shift_inverse(pd: PreprocessedDataset, *, checked: bool = False) -> np.ndarray:
    md = pd.metadata
    if not isinstance(md, MultiplyShiftMetadata):
        raise IntegrityError("metadata is not multiply-shift metadata")
    vals = pd.values.copy()
    if md.iteration_count < 0 or not 1 <= md.d <= fc.MANTISSA_BITS:
        raise IntegrityError("multiply-shift metadata out of range")
    if md.iteration_count == 0:
        return unalign(vals, md.alignment)
    if not (math.isfinite(md.a_1) and md.a_1 > 0):
        raise IntegrityError("first shift must be finite and positive")
    e = fc.region_of(md.a_1) + md.d
    if e != md.alignment.reference_e_star:
        raise IntegrityError("first shift does not match the reference region")
    nz = vals != 0
    reg = np.full(vals.size, np.iinfo(np.int64).min)
    reg[nz] = fc.regions(vals[nz])
    if np.any(reg[nz] < e) or np.any(reg[nz] > e + md.iteration_count):
        raise IntegrityError("transformed values fall outside the iterated regions")
    for i in range(md.iteration_count, 0, -1):
        shift = math.ldexp(md.a_1, i - 1)
        sel = np.flatnonzero(reg == e + i)
        y = vals[sel]
        x = (y - shift) / 2.0
        if checked:
            check(np.array_equal(2.0 * x + shift, y), "multiply-shift inverse is not exact")
        if x.size and np.any(fc.regions(x) != e + i - 1):
            raise IntegrityError("inverse step left the expected region")
        vals[sel] = x
        reg[sel] = e + i - 1
    return unalign(vals, md.alignment)
