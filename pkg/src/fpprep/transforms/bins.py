"""Compact bins: cluster unique values into bins and slide the bins together.

Bins never straddle an exponent region, so each region is packed on its own
towards the top of that region, into the window whose ``d`` leading mantissa
bits are all ones. Exponents are preserved. Every shift is a multiple of four
ulps, which is what the within-region addition predicate demands of a shift
one or more regions below the data.
"""

from __future__ import annotations

import numpy as np

from .. import fp_core as fc
from ..errors import CapacityError, ContractError, IntegrityError
from .base import (
    TOP_MANTISSA,
    CompactBinsMetadata,
    PreprocessedDataset,
    Technique,
    check,
    check_exact_add,
    check_within_region_shift,
    lossless_shift_units,
    units_to_float,
    validate_dataset,
)


def _choose_boundaries(regions: np.ndarray, mantissas: np.ndarray, k: int) -> list[int]:
    """Start indices of bins 2..k over the sorted unique values."""
    ell = regions.size
    forced = np.flatnonzero(np.diff(regions) != 0) + 1
    n_regions = forced.size + 1
    if k < n_regions:
        raise CapacityError(f"k={k} is smaller than the {n_regions} exponent regions present", max_feasible_d=None)
    extra = k - n_regions
    if extra == 0 or ell == 1:
        return sorted(forced.tolist())
    gaps = np.diff(mantissas).astype(np.int64)
    gaps[forced - 1] = -1  # region changes are already boundaries
    # largest gaps first; stable sort keeps the earlier gap on ties
    order = np.argsort(-gaps, kind="stable")
    chosen = order[:extra] + 1
    return sorted(set(forced.tolist()) | set(chosen.tolist()))


def _pack(lo: np.ndarray, hi: np.ndarray, regions_of_bin: np.ndarray, window_start: int):
    """Bottom-up packing of bins into ``[window_start, TOP]`` per region.

    Returns the shift of each bin in ulp units, or None if some region overflows.
    """
    shifts = np.zeros(lo.size, dtype=np.int64)
    pos = None
    prev_region = None
    for j in range(lo.size):
        if regions_of_bin[j] != prev_region:
            pos = window_start
            prev_region = regions_of_bin[j]
        s = max(0, lossless_shift_units(pos - int(lo[j]), up=True))
        new_hi = int(hi[j]) + s
        if new_hi > TOP_MANTISSA:
            return None
        shifts[j] = s
        pos = new_hi + 1
    return shifts


def compact_bins_forward(ds, k: int, d: int | None = None, *, checked: bool = False) -> PreprocessedDataset:
    """Pack ``k`` bins so every nonzero value shares ``d`` leading mantissa ones.

    With ``d=None`` the largest feasible ``d`` is used. ``k`` larger than the
    number of unique values is clamped to it.
    """
    arr = validate_dataset(ds)
    if k < 1:
        raise ContractError(f"k must be at least 1, got {k}")
    if d is not None and not 1 <= d <= fc.MANTISSA_BITS:
        raise ContractError(f"d={d} outside [1, 52]")
    nz = arr != 0
    if not nz.any():
        return PreprocessedDataset(arr.copy(), Technique.BINS, CompactBinsMetadata((0.0,), (), 1, d))
    uniq = np.unique(arr[nz])
    ell = uniq.size
    k = min(k, ell)
    reg = fc.regions(uniq)
    man = fc.mantissas(uniq)
    starts = [0] + _choose_boundaries(reg, man, k)
    ends = starts[1:] + [ell]
    lo = man[starts]
    hi = man[np.array(ends) - 1]
    bin_region = reg[starts]

    if d is None:
        chosen = None
        for cand in range(fc.MANTISSA_BITS, 0, -1):
            units = _pack(lo, hi, bin_region, fc.top_window_start(cand))
            if units is not None:
                chosen, d = units, cand
                break
        if chosen is None:
            raise CapacityError("bins do not fit even the d=1 window", max_feasible_d=0)
        units = chosen
    else:
        units = _pack(lo, hi, bin_region, fc.top_window_start(d))
        if units is None:
            best = 0
            for cand in range(d - 1, 0, -1):
                if _pack(lo, hi, bin_region, fc.top_window_start(cand)) is not None:
                    best = cand
                    break
            raise CapacityError(f"packed bins do not fit the d={d} window (max feasible d={best})", max_feasible_d=best)

    shifts = [units_to_float(int(u), int(e)) for u, e in zip(units, bin_region)]
    if checked:
        for s, e in zip(shifts, bin_region):
            check_within_region_shift(s, int(e))

    out = arr.copy()
    x = arr[nz]
    bin_of = np.searchsorted(uniq[starts], x, side="right") - 1
    shift_arr = np.asarray(shifts)[bin_of]
    y = x + shift_arr
    if checked:
        check_exact_add(x, shift_arr, y, "compact bins")
        check(np.array_equal(fc.regions(y), fc.regions(x)), "compact bins moved a value out of its region")
        check(fc.leading_bits_agree(y, d) and fc.mantissas(y).min() >= fc.top_window_start(d), "values missed the window")
    out[nz] = y
    meta = CompactBinsMetadata(tuple(shifts), tuple(starts[1:]), ell, d)
    return PreprocessedDataset(out, Technique.BINS, meta)


def compact_bins_inverse(pd: PreprocessedDataset, *, checked: bool = False) -> np.ndarray:
    md = pd.metadata
    if not isinstance(md, CompactBinsMetadata):
        raise IntegrityError("metadata is not compact-bins metadata")
    vals = pd.values.copy()
    nz = vals != 0
    if not nz.any():
        return vals
    uniq = np.unique(vals[nz])
    ell = uniq.size
    b = list(md.boundaries)
    if len(b) != md.k - 1:
        raise IntegrityError("boundary count does not match the number of shifts")
    if any(not 1 <= i < ell for i in b) or any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
        raise IntegrityError("bin boundaries are out of range or not increasing")
    shifts = np.asarray(md.shifts, dtype=np.float64)
    if not np.all(np.isfinite(shifts)) or np.any(shifts < 0):
        raise IntegrityError("bin shifts must be finite and non-negative")
    starts = [0] + b
    y = vals[nz]
    bin_of = np.searchsorted(uniq[starts], y, side="right") - 1
    x = y - shifts[bin_of]
    if np.any(x <= 0) or not np.array_equal(fc.regions(x), fc.regions(y)):
        raise IntegrityError("a shift moved a value out of its exponent region")
    if checked:
        check_exact_add(x, shifts[bin_of], y, "compact bins inverse")
    vals[nz] = x
    return vals
