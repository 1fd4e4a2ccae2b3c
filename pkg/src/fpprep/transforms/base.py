"""Shared types and helpers for the preprocessing techniques."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .. import fp_core as fc
from ..errors import CheckFailedError, ContractError, UnsupportedInputError

TOP_MANTISSA = (1 << fc.MANTISSA_BITS) - 1
IMPLICIT_ONE = 1 << fc.MANTISSA_BITS


class Technique(enum.IntEnum):
    BINS = 0
    MULSHIFT = 1
    EVENODD = 2
    EVENNESS = 3
    IDENTITY = 4

    @property
    def cli_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "Technique":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ContractError(f"unknown technique {name!r}") from None


@dataclass(frozen=True)
class AlignmentRecord:
    """Per-sample exponent deltas that bring every nonzero value into one region."""

    reference_e_star: int
    deltas: tuple[int, ...]
    zero_positions: bytes  # np.packbits of the zero mask

    @property
    def is_identity(self) -> bool:
        return not any(self.deltas)


@dataclass(frozen=True)
class IdentityMetadata:
    pass


@dataclass(frozen=True)
class CompactBinsMetadata:
    shifts: tuple[float, ...]
    boundaries: tuple[int, ...]  # index of the first unique value of bins 2..k
    ell: int
    d: int | None = field(default=None, compare=False)

    @property
    def k(self) -> int:
        return len(self.shifts)

    @property
    def boundary_bits(self) -> int:
        return math.ceil(math.log2(self.ell)) if self.ell > 1 else 0


@dataclass(frozen=True)
class MultiplyShiftMetadata:
    d: int
    a_1: float
    iteration_count: int
    alignment: AlignmentRecord


@dataclass(frozen=True)
class EvenOddSeparateMetadata:
    d: int
    e_star: int
    a_align: float
    w_0: float
    iteration_count: int
    alignment: AlignmentRecord


@dataclass(frozen=True)
class EvennessMetadata:
    d: int
    e_star: int
    a_align: float
    iteration_count: int
    n: int
    evenness_bits: tuple[bytes, ...]  # one packed n-bit bitmap per iteration
    alignment: AlignmentRecord


Metadata = Union[
    IdentityMetadata, CompactBinsMetadata, MultiplyShiftMetadata, EvenOddSeparateMetadata, EvennessMetadata
]


@dataclass(eq=False)
class PreprocessedDataset:
    values: np.ndarray
    technique: Technique
    metadata: Metadata

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)

    def __len__(self) -> int:
        return self.values.size

    @property
    def iteration_count(self) -> int:
        return getattr(self.metadata, "iteration_count", 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PreprocessedDataset):
            return NotImplemented
        return (
            self.technique == other.technique
            and self.metadata == other.metadata
            and np.array_equal(fc.as_bits(self.values), fc.as_bits(other.values))
        )


def validate_dataset(ds) -> np.ndarray:
    arr = np.ascontiguousarray(ds, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise UnsupportedInputError("dataset is empty")
    bits = fc.as_bits(arr)
    exp = (bits >> np.uint64(52)) & np.uint64(0x7FF)
    if np.any(exp == 0x7FF):
        raise UnsupportedInputError("dataset contains NaN or infinity")
    if np.any(arr < 0):
        raise UnsupportedInputError("dataset contains negative values")
    if np.any((exp == 0) & (arr != 0)):
        raise UnsupportedInputError("dataset contains subnormal values")
    return arr


def zero_mask(values: np.ndarray) -> np.ndarray:
    return values == 0


def units_to_float(units: int, e: int) -> float:
    """``units * ulp(2**e)`` as an exact float (``|units| < 2**53``)."""
    return math.ldexp(units, e - fc.MANTISSA_BITS)


def float_to_units(x: float, e: int) -> int:
    q = math.ldexp(x, fc.MANTISSA_BITS - e)
    if q != int(q):
        raise ValueError(f"{x!r} is not a multiple of ulp(2**{e})")
    return int(q)


def region_value(e: int, mantissa: int) -> float:
    return math.ldexp(IMPLICIT_ONE + mantissa, e - fc.MANTISSA_BITS)


def lossless_shift_units(target: int, *, up: bool) -> int:
    """Round a shift in ulp units to a multiple of 4 so the within-region predicate holds."""
    return -((-target) // 4) * 4 if up else (target // 4) * 4


def check(cond, message: str) -> None:
    if not cond:
        raise CheckFailedError(message)


def check_within_region_shift(shift: float, e: int) -> None:
    if shift != 0:
        check(fc.is_lossless_add_within_region(abs(shift), e), f"shift {shift!r} fails the within-region predicate for region {e}")


def check_exact_add(x: np.ndarray, shift, y: np.ndarray, what: str) -> None:
    check(np.array_equal(y - shift, x), f"{what}: addition was not exact")
