"""Parametric small-width binary floating point used as a brute-force oracle.

A ``MiniFormat`` has a mantissa of ``width`` bits and an unbiased exponent
range ``[emin, emax]``. Addition and multiplication are implemented on
integer significands with explicit guard/round/sticky bits and
round-to-nearest-ties-to-even. ``from_fraction`` rounds an exact rational
independently of that path and is the reference the emulator is tested
against. Division goes through the rational reference.

Subnormals are not emulated: a result below ``2**emin`` is flagged as
underflow and flushed to zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from .errors import ContractError


@dataclass(frozen=True)
class MiniFormat:
    width: int
    emin: int = -8
    emax: int = 8

    def __post_init__(self):
        if not 2 <= self.width <= 16:
            raise ContractError(f"mantissa width {self.width} outside [2, 16]")
        if self.emin > self.emax:
            raise ContractError("emin must not exceed emax")

    @property
    def bias(self) -> int:
        return 1 - self.emin

    @property
    def inf_biased(self) -> int:
        return self.emax + self.bias + 1

    def region(self, e: int) -> Iterator["MiniFloat"]:
        """All positive values with unbiased exponent ``e``, ascending."""
        for m in range(1 << self.width):
            yield MiniFloat(self, 0, e + self.bias, m)

    def make(self, e: int, mantissa: int, sign: int = 0) -> "MiniFloat":
        if not self.emin <= e <= self.emax:
            raise ContractError(f"exponent {e} outside [{self.emin}, {self.emax}]")
        if not 0 <= mantissa < (1 << self.width):
            raise ContractError(f"mantissa {mantissa} does not fit in {self.width} bits")
        return MiniFloat(self, sign, e + self.bias, mantissa)

    def zero(self, sign: int = 0) -> "MiniFloat":
        return MiniFloat(self, sign, 0, 0)

    def inf(self, sign: int = 0) -> "MiniFloat":
        return MiniFloat(self, sign, self.inf_biased, 0, overflow=True)


@dataclass(frozen=True)
class MiniFloat:
    fmt: MiniFormat
    sign: int
    biased: int
    mantissa: int
    overflow: bool = field(default=False, compare=False)
    underflow: bool = field(default=False, compare=False)

    @property
    def is_zero(self) -> bool:
        return self.biased == 0

    @property
    def is_inf(self) -> bool:
        return self.biased == self.fmt.inf_biased

    @property
    def exponent(self) -> int:
        return self.biased - self.fmt.bias

    @property
    def significand(self) -> int:
        """Integer significand including the implicit leading one."""
        return (1 << self.fmt.width) | self.mantissa

    def to_fraction(self) -> Fraction:
        if self.is_inf:
            raise ContractError("infinity has no rational value")
        if self.is_zero:
            return Fraction(0)
        q = Fraction(self.significand) * Fraction(2) ** (self.exponent - self.fmt.width)
        return -q if self.sign else q

    def __neg__(self) -> "MiniFloat":
        return MiniFloat(self.fmt, self.sign ^ 1, self.biased, self.mantissa)

    def __repr__(self) -> str:
        if self.is_zero:
            return f"MiniFloat({'-' if self.sign else '+'}0, w={self.fmt.width})"
        if self.is_inf:
            return f"MiniFloat({'-' if self.sign else '+'}inf, w={self.fmt.width})"
        return f"MiniFloat({self.to_fraction()}, w={self.fmt.width})"


def _pack(fmt: MiniFormat, sign: int, e: int, sig: int) -> MiniFloat:
    """Build from an already rounded significand in ``[2**w, 2**(w+1))``."""
    if e > fmt.emax:
        return MiniFloat(fmt, sign, fmt.inf_biased, 0, overflow=True)
    if e < fmt.emin:
        return MiniFloat(fmt, sign, 0, 0, underflow=True)
    return MiniFloat(fmt, sign, e + fmt.bias, sig - (1 << fmt.width))


def _check_pair(a: MiniFloat, b: MiniFloat) -> None:
    if a.fmt != b.fmt:
        raise ContractError("operands use different formats")
    if a.is_inf or b.is_inf:
        raise ContractError("operands must be finite")


def from_fraction(fmt: MiniFormat, q: Fraction) -> MiniFloat:
    """Round an exact rational to ``fmt`` (nearest, ties to even)."""
    if q == 0:
        return fmt.zero()
    sign = 1 if q < 0 else 0
    q = abs(q)
    w = fmt.width
    e = q.numerator.bit_length() - q.denominator.bit_length()
    if Fraction(2) ** e > q:
        e -= 1
    # q in [2**e, 2**(e+1)); scaled in [2**w, 2**(w+1))
    scaled = q / Fraction(2) ** (e - w)
    n = scaled.numerator // scaled.denominator
    rem = scaled - n
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and n & 1):
        n += 1
    if n == 1 << (w + 1):
        n >>= 1
        e += 1
    return _pack(fmt, sign, e, n)


def _round_grs(fmt: MiniFormat, sign: int, e: int, sig: int, extra: int) -> MiniFloat:
    """Round ``sig`` carrying ``extra`` low bits (guard, round..., sticky) to ``w+1`` bits."""
    keep = sig >> extra
    low = sig & ((1 << extra) - 1)
    half = 1 << (extra - 1)
    if low > half or (low == half and keep & 1):
        keep += 1
    if keep == 1 << (fmt.width + 1):
        keep >>= 1
        e += 1
    return _pack(fmt, sign, e, keep)


def mini_add(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    _check_pair(a, b)
    fmt = a.fmt
    if a.is_zero and b.is_zero:
        return fmt.zero(a.sign & b.sign)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    # order by magnitude
    if (a.biased, a.mantissa) < (b.biased, b.mantissa):
        a, b = b, a
    w = fmt.width
    extra = 3  # guard, round, sticky
    sa = a.significand << extra
    sb = b.significand << extra
    shift = a.exponent - b.exponent
    if shift:
        if shift >= w + extra + 1:
            sb = 1  # only the sticky bit survives
        else:
            sticky = 1 if sb & ((1 << shift) - 1) else 0
            sb = (sb >> shift) | sticky
    e = a.exponent
    if a.sign == b.sign:
        s = sa + sb
    else:
        s = sa - sb
        if s == 0:
            return fmt.zero(0)
    top = 1 << (w + extra)
    if s >= top << 1:
        s = (s >> 1) | (s & 1)
        e += 1
    while s < top:
        s <<= 1
        e -= 1
    return _round_grs(fmt, a.sign, e, s, extra)


def mini_sub(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    return mini_add(a, -b)


def mini_mul(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    _check_pair(a, b)
    fmt = a.fmt
    sign = a.sign ^ b.sign
    if a.is_zero or b.is_zero:
        return fmt.zero(sign)
    w = fmt.width
    p = a.significand * b.significand  # in [2**2w, 2**(2w+2))
    e = a.exponent + b.exponent
    drop = w
    if p >= 1 << (2 * w + 1):
        drop += 1
        e += 1
    # fold everything below the guard bit into one sticky bit
    guard_and_below = p & ((1 << drop) - 1)
    keep = p >> drop
    guard = guard_and_below >> (drop - 1)
    sticky = 1 if guard_and_below & ((1 << (drop - 1)) - 1) else 0
    return _round_grs(fmt, sign, e, (keep << 2) | (guard << 1) | sticky, 2)


def mini_div(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    _check_pair(a, b)
    if b.is_zero:
        raise ZeroDivisionError("mini_div by zero")
    return from_fraction(a.fmt, a.to_fraction() / b.to_fraction())


# -- exhaustive verification of the losslessness predicates -------------------------


class Scenario(str, enum.Enum):
    CROSS_REGION_ADD = "cross_region_add"
    WITHIN_REGION_ADD = "within_region_add"
    REGION_STEP_MUL = "region_step_mul"


@dataclass(frozen=True)
class RoundtripReport:
    width: int
    scenario: str
    total_pairs: int
    predicate_true: int
    violations: int
    predicate_false: int
    predicate_false_losses: int
    first_loss: tuple | None = None
    false_exhaustive: bool = True

    @property
    def ok(self) -> bool:
        return self.violations == 0


def mini_cross_region_predicate(x: MiniFloat, a: MiniFloat) -> bool:
    return (x.mantissa & 1) == (a.mantissa & 1)


def mini_within_region_predicate(a: MiniFloat, e_star: int) -> bool:
    """Trailing ``gap + 2`` mantissa bits of the shift are zero (fails past the implicit bit)."""
    nbits = e_star - a.exponent + 2
    if nbits > a.fmt.width:
        return False
    return a.mantissa & ((1 << nbits) - 1) == 0


def exhaustive_roundtrip_report(
    width: int, scenario, multiplier: MiniFloat | None = None, full_false_up_to: int = 7
) -> RoundtripReport:
    """Enumerate every operand pair of a scenario at mantissa width ``width``.

    Predicate-true pairs are always enumerated in full. Above
    ``full_false_up_to`` the within-region scenario evaluates predicate-false
    pairs only until the first loss is seen (necessity probe), and
    ``total_pairs`` counts evaluated pairs.

    cross_region_add   x, a in region 0 (sum lands in region 1): all 4**w pairs.
    within_region_add  x in region 0, a in region -g for g in 1..w, keeping pairs
                       whose computed sum stays in region 0.
    region_step_mul    x in region 0, m in regions 0 and 1, keeping pairs whose
                       product lands in region 1; ``multiplier`` restricts m.
    """
    if not 2 <= width <= 10:
        raise ContractError(f"width {width} outside [2, 10]")
    scenario = Scenario(scenario)
    fmt = MiniFormat(width)
    total = ptrue = viol = pfalse = plost = 0
    first_loss = None
    xs = list(fmt.region(0))

    def record(pred: bool, lossless: bool, x, a):
        nonlocal ptrue, viol, pfalse, plost, first_loss
        if pred:
            ptrue += 1
            viol += not lossless
        else:
            pfalse += 1
            if not lossless:
                plost += 1
                if first_loss is None:
                    first_loss = (x, a)

    if scenario is Scenario.CROSS_REGION_ADD:
        for x in xs:
            for a in fmt.region(0):
                total += 1
                y = mini_add(x, a)
                record(mini_cross_region_predicate(x, a), mini_sub(y, a) == x, x, a)
    elif scenario is Scenario.WITHIN_REGION_ADD:
        probe_only = width > full_false_up_to
        for gap in range(1, width + 1):
            for a in fmt.region(-gap):
                pred = mini_within_region_predicate(a, 0)
                if not pred and probe_only and first_loss is not None:
                    continue
                for x in xs:
                    y = mini_add(x, a)
                    if y.exponent != 0:
                        continue
                    total += 1
                    record(pred, mini_sub(y, a) == x, x, a)
                    if not pred and probe_only and first_loss is not None:
                        break
    else:
        ms = [multiplier] if multiplier is not None else list(fmt.region(0)) + list(fmt.region(1))
        two = from_fraction(fmt, Fraction(2))
        for m in ms:
            for x in xs:
                y = mini_mul(x, m)
                if y.is_inf or y.exponent != 1:
                    continue
                total += 1
                pred = m.to_fraction() >= two.to_fraction()
                record(pred, mini_div(y, m) == x, x, m)
    false_exhaustive = not (scenario is Scenario.WITHIN_REGION_ADD and width > full_false_up_to)
    return RoundtripReport(width, scenario.value, total, ptrue, viol, pfalse, plost, first_loss, false_exhaustive)


# Cross-region addition outcome table: rows are the shift's two trailing bits,
# columns the operand's two trailing bits; each cell is (result LSB, lossless).
TAIL_TABLE = {
    (0b00, 0b00): (0, True), (0b00, 0b01): (0, False), (0b00, 0b10): (1, True), (0b00, 0b11): (0, False),
    (0b01, 0b00): (0, False), (0b01, 0b01): (1, True), (0b01, 0b10): (0, False), (0b01, 0b11): (0, True),
    (0b10, 0b00): (1, True), (0b10, 0b01): (0, False), (0b10, 0b10): (0, True), (0b10, 0b11): (0, False),
    (0b11, 0b00): (0, False), (0b11, 0b01): (0, True), (0b11, 0b10): (0, False), (0b11, 0b11): (1, True),
}


def tail_table(width: int) -> dict[tuple[int, int], set[tuple[int, bool]]]:
    """Observed (result LSB, lossless) outcomes per (shift tail, operand tail) cell.

    A faithful reproduction has exactly one outcome per cell.
    """
    fmt = MiniFormat(width)
    cells: dict[tuple[int, int], set[tuple[int, bool]]] = {}
    for a in fmt.region(0):
        for x in fmt.region(0):
            y = mini_add(x, a)
            lossless = mini_sub(y, a) == x
            cells.setdefault((a.mantissa & 3, x.mantissa & 3), set()).add((y.mantissa & 1, lossless))
    return cells
