"""Shift and separate even from odd mantissas.

Adding two values of the same region whose sum lands one region up is exact
when both share their last mantissa bit. Even mantissas get an even shift,
odd ones an odd shift that is lower by more than the active span, so the two
halves land in disjoint sub-windows of the next region and the inverse can
tell them apart without per-sample metadata.

Everything is tracked in ulp units of the current region. ``H`` is the last
mantissa below the top ``d``-bit window and ``L_i`` a lower bound on the
active mantissas; the active span is ``W_i = H - L_i``. The bound sequence is
regenerated from ``W_0`` alone, which is what the inverse relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import fp_core as fc
from ..errors import ContractError, IntegrityError, NonConvergenceError, RangeExhaustedError
from .align import align_exponents, unalign
from .base import (
    IMPLICIT_ONE,
    EvenOddSeparateMetadata,
    PreprocessedDataset,
    Technique,
    check,
    check_exact_add,
    float_to_units,
    lossless_shift_units,
    units_to_float,
)

DEFAULT_MAX_ITER = 64
EVEN_SHIFT_UNITS = IMPLICIT_ONE - 2  # largest even mantissa: 2**(e+1) - 2 ulps


@dataclass(frozen=True)
class Step:
    """Bounds and shifts (ulp units of the current region) of one iteration."""

    low: int
    a_even: int
    a_odd: int

    def even_range(self, high: int) -> tuple[int, int]:
        lowest_even = self.low + (self.low & 1)
        return (lowest_even + self.a_even) // 2, (high + self.a_even) // 2

    def odd_range(self, high: int) -> tuple[int, int]:
        return -(-(self.low + self.a_odd) // 2), (high + self.a_odd) // 2


def window_high(d: int) -> int:
    return fc.top_window_start(d) - 1


def pre_shift_units(mant_min: int, mant_max: int, high: int) -> int:
    """Multiple of 4 ulps that moves the top of the data to ``high`` without leaving the region."""
    s = lossless_shift_units(high - mant_max, up=False)
    if mant_min + s < 0:
        s = lossless_shift_units(-mant_min, up=True)
    return s


def next_step(low: int, high: int) -> Step | None:
    width = high - low
    delta = width + 1 if width % 2 == 0 else width + 2  # smallest odd number above the span
    a_odd = EVEN_SHIFT_UNITS - delta
    if a_odd < 0:
        return None
    return Step(low, EVEN_SHIFT_UNITS, a_odd)


def schedule(w_0: int, d: int, max_iter: int) -> list[Step] | None:
    """All iteration steps the bound recurrence needs, or None if it stalls or runs past ``max_iter``."""
    high = window_high(d)
    low = high - w_0
    steps = []
    while low <= high:
        if len(steps) >= max_iter:
            return None
        st = next_step(low, high)
        if st is None:
            return None
        new_low = -(-(low + st.a_odd) // 2)
        if new_low <= low:
            return None
        steps.append(st)
        low = new_low
    return steps


def max_feasible_d(w_0_at: dict[int, int], max_iter: int) -> int:
    best = 0
    for d in range(1, fc.MANTISSA_BITS + 1):
        if schedule(w_0_at[d], d, max_iter) is not None:
            best = d
    return best


def _span_for(mant_min: int, mant_max: int, d: int) -> int:
    high = window_high(d)
    s = pre_shift_units(mant_min, mant_max, high)
    return max(0, high - (mant_min + s))


def even_odd_separate_forward(
    ds, d: int, *, max_iter: int = DEFAULT_MAX_ITER, checked: bool = False, trace: list | None = None
) -> PreprocessedDataset:
    """``trace``, when given, receives ``(even_interval, odd_interval)`` per iteration in ulps of the output region."""
    if not 1 <= d <= fc.MANTISSA_BITS:
        raise ContractError(f"d={d} outside [1, 52]")
    aligned, record = align_exponents(ds)
    out = aligned.copy()
    nz = np.flatnonzero(aligned != 0)
    e = record.reference_e_star
    if nz.size == 0:
        meta = EvenOddSeparateMetadata(d, e, 0.0, 0.0, 0, record)
        return PreprocessedDataset(out, Technique.EVENODD, meta)

    high = window_high(d)
    mant = fc.mantissas(out[nz])
    lo_m, hi_m = int(mant.min()), int(mant.max())
    s = pre_shift_units(lo_m, hi_m, high)
    a_align = units_to_float(s, e)
    if s:
        x = out[nz]
        y = x + a_align
        if checked:
            check_exact_add(x, a_align, y, "alignment shift")
            check(np.all(fc.regions(y) == e), "alignment shift left the region")
        out[nz] = y
    w_units = max(0, high - (lo_m + s))
    w_0 = units_to_float(w_units, e)

    steps = schedule(w_units, d, max_iter)
    if steps is None:
        spans = {dd: _span_for(lo_m, hi_m, dd) for dd in range(1, fc.MANTISSA_BITS + 1)}
        best = max_feasible_d(spans, max_iter)
        raise NonConvergenceError(
            f"even/odd separation cannot reach d={d} within {max_iter} iterations (max feasible d={best})",
            max_feasible_d=best,
        )
    if e + len(steps) > fc.E_MAX:
        raise RangeExhaustedError(f"{len(steps)} iterations would leave the largest exponent region")

    active = nz[fc.mantissas(out[nz]) <= high]
    t = 0
    for i, st in enumerate(steps):
        if not active.size:
            break
        cur = e + i
        x = out[active]
        m = fc.mantissas(x)
        if checked:
            check(m.min() >= st.low, "active value below the tracked lower bound")
        odd = (m & 1).astype(bool)
        shift = np.where(odd, units_to_float(IMPLICIT_ONE + st.a_odd, cur), units_to_float(IMPLICIT_ONE + st.a_even, cur))
        y = x + shift
        if checked:
            check_exact_add(x, shift, y, "even/odd separation")
            check(np.all(fc.regions(y) == cur + 1), "even/odd step did not land one region up")
            ev, od = st.even_range(high), st.odd_range(high)
            check(od[1] < ev[0], "even and odd sub-windows overlap")
            ym = fc.mantissas(y)
            check(np.all((ym[~odd] >= ev[0]) & (ym[~odd] <= ev[1])), "even value outside its sub-window")
            check(np.all((ym[odd] >= od[0]) & (ym[odd] <= od[1])), "odd value outside its sub-window")
        if trace is not None:
            ym = fc.mantissas(y)
            ev = (int(ym[~odd].min()), int(ym[~odd].max())) if (~odd).any() else None
            od = (int(ym[odd].min()), int(ym[odd].max())) if odd.any() else None
            trace.append((ev, od))
        out[active] = y
        active = active[fc.mantissas(y) <= high]
        t = i + 1
    if active.size:
        raise NonConvergenceError("even/odd separation left values outside the window", max_feasible_d=None)

    meta = EvenOddSeparateMetadata(d, e, a_align, w_0, t, record)
    return PreprocessedDataset(out, Technique.EVENODD, meta)


def even_odd_separate_inverse(
    pd: PreprocessedDataset, *, max_iter: int = DEFAULT_MAX_ITER, checked: bool = False
) -> np.ndarray:
    md = pd.metadata
    if not isinstance(md, EvenOddSeparateMetadata):
        raise IntegrityError("metadata is not even/odd metadata")
    if not 1 <= md.d <= fc.MANTISSA_BITS or md.iteration_count < 0:
        raise IntegrityError("even/odd metadata out of range")
    vals = pd.values.copy()
    nz = vals != 0
    if not nz.any():
        return unalign(vals, md.alignment)
    e, high = md.e_star, window_high(md.d)
    try:
        w_units = float_to_units(md.w_0, e) if md.w_0 else 0
        s = float_to_units(md.a_align, e) if md.a_align else 0
    except (ValueError, OverflowError):
        raise IntegrityError("even/odd shifts are not on the region's ulp grid") from None
    steps = schedule(w_units, md.d, max(max_iter, md.iteration_count))
    if steps is None or len(steps) < md.iteration_count:
        raise IntegrityError("stored span does not regenerate the recorded iteration count")

    reg = np.full(vals.size, np.iinfo(np.int64).min)
    reg[nz] = fc.regions(vals[nz])
    if np.any(reg[nz] < e) or np.any(reg[nz] > e + md.iteration_count):
        raise IntegrityError("transformed values fall outside the iterated regions")
    for i in range(md.iteration_count - 1, -1, -1):
        st = steps[i]
        cur = e + i
        sel = np.flatnonzero(reg == cur + 1)
        if not sel.size:
            continue
        y = vals[sel]
        ym = fc.mantissas(y)
        ev, od = st.even_range(high), st.odd_range(high)
        is_even = ym >= ev[0]
        in_odd = (ym >= od[0]) & (ym <= od[1])
        in_even = ym <= ev[1]
        if np.any(is_even & ~in_even) or np.any(~is_even & ~in_odd):
            raise IntegrityError(f"value falls on no sub-window at iteration {i + 1}")
        shift = np.where(is_even, units_to_float(IMPLICIT_ONE + st.a_even, cur), units_to_float(IMPLICIT_ONE + st.a_odd, cur))
        x = y - shift
        if checked:
            check_exact_add(x, shift, y, "even/odd inverse")
        vals[sel] = x
        reg[sel] = cur
    if s:
        vals[nz] = vals[nz] - md.a_align
        if np.any(vals[nz] <= 0) or np.any(fc.regions(vals[nz]) != e):
            raise IntegrityError("alignment shift moved values out of the reference region")
    return unalign(vals, md.alignment)


def recurrence_next(w: float, e_star: int, d: int) -> float:
    """Closed-form span recurrence ``W' = 2W - 2**(e*-d)`` in value units."""
    return 2.0 * w - math.ldexp(1.0, e_star - d)
