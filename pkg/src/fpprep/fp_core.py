"""Bit-level primitives for IEEE-754 binary64 values.

Everything here is a pure function. Array helpers work on ``numpy.float64``
arrays through a ``uint64`` view so that NaN payloads and signed zeros are
never disturbed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, EmptyInputError, InvalidFieldError

BIAS = 1023
MANTISSA_BITS = 52
EXPONENT_BITS = 11
E_MIN = -1022
E_MAX = 1023

SIGN_MASK = 1 << 63
EXPONENT_MASK = 0x7FF << MANTISSA_BITS
MANTISSA_MASK = (1 << MANTISSA_BITS) - 1
ALL_ONES = (1 << 64) - 1


def _assert_round_to_nearest_even() -> None:
    # Probes that distinguish RNE from the three directed modes and from
    # ties-away. The transforms are only proven lossless under RNE.
    half_ulp = 2.0**-53
    probes = (
        (1.0 + half_ulp, 1.0),  # tie, even neighbour below
        ((1.0 + 2 * half_ulp) + half_ulp, 1.0 + 4 * half_ulp),  # tie, even neighbour above
        (-1.0 - half_ulp, -1.0),
        (1.0 + 1.5 * half_ulp, 1.0 + 2 * half_ulp),  # above the tie rounds up
    )
    vec = np.array([1.0, 1.0 + 2 * half_ulp, -1.0]) + np.array([half_ulp, half_ulp, -half_ulp])
    ok = all(got == want for got, want in probes) and vec.tolist() == [1.0, 1.0 + 4 * half_ulp, -1.0]
    if not ok:
        raise RuntimeError("floating point rounding mode is not round-to-nearest-ties-to-even")


_assert_round_to_nearest_even()


@dataclass(frozen=True)
class FpBits:
    sign: int
    biased_exponent: int
    mantissa: int

    @property
    def unbiased_exponent(self) -> int:
        return self.biased_exponent - BIAS

    @property
    def pattern(self) -> int:
        return (self.sign << 63) | (self.biased_exponent << MANTISSA_BITS) | self.mantissa

    def mantissa_bit(self, i: int) -> int:
        """Mantissa bit ``m_i``, 1-based with ``m_1`` the most significant."""
        if not 1 <= i <= MANTISSA_BITS:
            raise ContractError(f"mantissa index {i} outside 1..52")
        return (self.mantissa >> (MANTISSA_BITS - i)) & 1


@dataclass(frozen=True)
class ExponentRegion:
    e_star: int

    @property
    def low(self) -> float:
        return math.ldexp(1.0, self.e_star)

    @property
    def high(self) -> float:
        """Exclusive upper end of the region."""
        return math.ldexp(1.0, self.e_star + 1)

    def __contains__(self, x: float) -> bool:
        b = decompose(x)
        return 0 < b.biased_exponent < 0x7FF and b.unbiased_exponent == self.e_star


@dataclass(frozen=True)
class SharedBitsSummary:
    s_sign: int
    s_e: int
    s_m: int
    shared_mask: int
    shared_value: int

    @property
    def s_tot(self) -> int:
        return self.s_sign + self.s_e + self.s_m

    def leading_mantissa_shared(self) -> int:
        """Number of leading mantissa bits (from m_1 down) that are all shared."""
        n = 0
        for i in range(1, MANTISSA_BITS + 1):
            if not (self.shared_mask >> (MANTISSA_BITS - i)) & 1:
                break
            n += 1
        return n


def to_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def from_bits(pattern: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", pattern))[0]


def decompose(x: float) -> FpBits:
    p = to_bits(x)
    return FpBits(p >> 63, (p >> MANTISSA_BITS) & 0x7FF, p & MANTISSA_MASK)


def compose(b: FpBits) -> float:
    if b.sign not in (0, 1):
        raise InvalidFieldError(f"sign must be 0 or 1, got {b.sign}")
    if not 0 <= b.biased_exponent <= 0x7FF:
        raise InvalidFieldError(f"biased exponent {b.biased_exponent} outside [0, 2047]")
    if not 0 <= b.mantissa <= MANTISSA_MASK:
        raise InvalidFieldError(f"mantissa {b.mantissa:#x} does not fit in 52 bits")
    return from_bits(b.pattern)


def _require_normal(x: float, what: str) -> FpBits:
    b = decompose(x)
    if b.biased_exponent == 0x7FF:
        raise DomainError(f"{what}: {x!r} is not finite")
    if b.biased_exponent == 0:
        raise DomainError(f"{what}: {x!r} is zero or subnormal")
    return b


def ulp(x: float) -> float:
    """Spacing of binary64 values at ``x``'s own exponent: 2**(E - 1023 - 52)."""
    b = _require_normal(x, "ulp")
    return math.ldexp(1.0, b.biased_exponent - BIAS - MANTISSA_BITS)


def exponent_region(x: float) -> ExponentRegion:
    b = _require_normal(x, "exponent_region")
    if b.sign:
        raise DomainError(f"exponent_region: {x!r} is negative")
    return ExponentRegion(b.unbiased_exponent)


def region_of(x: float) -> int:
    return exponent_region(x).e_star


def shared_bits(values) -> SharedBitsSummary:
    bits = as_bits(values)
    if bits.size == 0:
        raise EmptyInputError("shared_bits needs at least one value")
    all_and = int(np.bitwise_and.reduce(bits))
    all_or = int(np.bitwise_or.reduce(bits))
    mask = ~(all_and ^ all_or) & ALL_ONES
    return SharedBitsSummary(
        s_sign=(mask >> 63) & 1,
        s_e=bin(mask & EXPONENT_MASK).count("1"),
        s_m=bin(mask & MANTISSA_MASK).count("1"),
        shared_mask=mask,
        shared_value=all_and & mask,
    )


def as_bits(values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    return arr.reshape(-1).view(np.uint64)


def bits_to_floats(bits: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(bits, dtype=np.uint64).view(np.float64)


def regions(values: np.ndarray) -> np.ndarray:
    """Unbiased exponents of an array of positive normal values (no logarithms)."""
    b = as_bits(values)
    return ((b >> np.uint64(MANTISSA_BITS)) & np.uint64(0x7FF)).astype(np.int64) - BIAS


def mantissas(values: np.ndarray) -> np.ndarray:
    return (as_bits(values) & np.uint64(MANTISSA_MASK)).astype(np.int64)


def is_lossless_add_cross_region(x: float, a: float) -> bool:
    """Sufficient condition for ``(x + a) - a == x`` when the sum crosses one region up.

    Both operands must be positive, share exponent region ``e*`` and their
    computed sum must land in region ``e* + 1``. The guard bit that is rounded
    away is zero exactly when both addends have the same ``m_52``.
    """
    if not (x > 0 and a > 0):
        raise ContractError("cross-region addition needs strictly positive operands")
    ex, ea = region_of(x), region_of(a)
    if ex != ea:
        raise ContractError(f"operands in different regions ({ex} vs {ea})")
    s = x + a
    if not math.isfinite(s) or region_of(s) != ex + 1:
        raise ContractError("sum does not land in the next exponent region")
    return (to_bits(x) & 1) == (to_bits(a) & 1)


def within_region_zero_bits(gap: int) -> int:
    """How many trailing mantissa bits of the shift must be zero for an exponent gap.

    The index set ``{52 - (gap + 1), ..., 52}`` has ``gap + 2`` members.
    """
    return gap + 2


def is_lossless_add_within_region(a: float, e_star: int) -> bool:
    """Sufficient condition for adding ``a`` to any ``x`` that stays in region ``e_star``.

    ``a`` lives in a lower region ``e~``. The trailing ``e_star - e~ + 2``
    mantissa bits of ``a`` must be zero. When that set would reach past
    ``m_1`` (into the implicit leading one) no guarantee is given.

    A False result means "no guarantee", not "loss".
    """
    a_abs = abs(a)
    e_tilde = region_of(a_abs)
    if e_tilde >= e_star:
        raise ContractError(f"shift region {e_tilde} is not below target region {e_star}")
    nbits = within_region_zero_bits(e_star - e_tilde)
    if nbits > MANTISSA_BITS:
        return False
    return decompose(a_abs).mantissa & ((1 << nbits) - 1) == 0


def round_down_within_region(a: float, e_star: int) -> float | None:
    """Largest value ``<= a`` (same region as ``a``) satisfying the within-region predicate.

    Returns None when no such value exists in ``a``'s region.
    """
    b = _require_normal(a, "round_down_within_region")
    e_tilde = b.unbiased_exponent
    if e_tilde >= e_star:
        raise ContractError(f"shift region {e_tilde} is not below target region {e_star}")
    nbits = within_region_zero_bits(e_star - e_tilde)
    if nbits > MANTISSA_BITS:
        return None
    m = b.mantissa & ~((1 << nbits) - 1)
    return compose(FpBits(b.sign, b.biased_exponent, m))


def is_lossless_mul_factor(m: float) -> bool:
    """True iff ``m >= 2``: then ``(x*m)/m == x`` whenever ``x*m`` lands one region up."""
    if not (math.isfinite(m) and m > 0):
        raise DomainError(f"multiplier {m!r} must be finite and positive")
    return m >= 2.0


def target_region(e: int, d: int) -> tuple[float, float]:
    """Interval ``[2**e, 2**e + 2**(e-d)]`` whose interior shares ``d`` leading zero mantissa bits.

    The upper endpoint itself has ``m_d = 1``; the guarantee holds on the
    half-open interval.
    """
    if not E_MIN <= e <= E_MAX:
        raise ContractError(f"exponent {e} outside [{E_MIN}, {E_MAX}]")
    if not 1 <= d <= MANTISSA_BITS:
        raise ContractError(f"d={d} outside [1, 52]")
    lo = math.ldexp(1.0, e)
    return lo, lo + math.ldexp(1.0, e - d)


def top_window_start(d: int) -> int:
    """Smallest mantissa whose ``d`` leading bits are all ones."""
    return (1 << MANTISSA_BITS) - (1 << (MANTISSA_BITS - d))


def leading_bits_agree(values, d: int) -> bool:
    """Do all values agree on their ``d`` most significant mantissa bits?"""
    if d == 0:
        return True
    m = as_bits(values) & np.uint64(MANTISSA_MASK)
    top = m >> np.uint64(MANTISSA_BITS - d)
    return bool(np.all(top == top[0]))
