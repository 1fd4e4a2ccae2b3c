"""Invertible preprocessing techniques that raise the number of shared mantissa bits."""

from __future__ import annotations

import numpy as np

from .. import fp_core as fc
from ..errors import CheckFailedError, ContractError, IntegrityError
from .align import align_exponents, unalign
from .base import (
    AlignmentRecord,
    CompactBinsMetadata,
    EvennessMetadata,
    EvenOddSeparateMetadata,
    IdentityMetadata,
    MultiplyShiftMetadata,
    PreprocessedDataset,
    Technique,
    validate_dataset,
)
from .bins import compact_bins_forward, compact_bins_inverse
from .evenness import save_evenness_forward, save_evenness_inverse
from .evenodd import even_odd_separate_forward, even_odd_separate_inverse
from .mulshift import multiply_shift_forward, multiply_shift_inverse

__all__ = [
    "AlignmentRecord",
    "CompactBinsMetadata",
    "EvenOddSeparateMetadata",
    "EvennessMetadata",
    "IdentityMetadata",
    "MultiplyShiftMetadata",
    "PreprocessedDataset",
    "Technique",
    "align_exponents",
    "unalign",
    "compact_bins_forward",
    "compact_bins_inverse",
    "multiply_shift_forward",
    "multiply_shift_inverse",
    "even_odd_separate_forward",
    "even_odd_separate_inverse",
    "save_evenness_forward",
    "save_evenness_inverse",
    "identity_forward",
    "identity_inverse",
    "forward",
    "inverse",
    "shares_leading_bits",
    "is_all_equal",
]


def identity_forward(ds) -> PreprocessedDataset:
    arr = validate_dataset(ds)
    return PreprocessedDataset(arr.copy(), Technique.IDENTITY, IdentityMetadata())


def identity_inverse(pd: PreprocessedDataset) -> np.ndarray:
    return pd.values.copy()


def is_all_equal(values: np.ndarray) -> bool:
    """All values bit-identical, or all of them zeros of either sign."""
    bits = fc.as_bits(values)
    return bool(np.all(bits == bits[0]) or not np.any(values != 0))


def shares_leading_bits(values: np.ndarray, d: int) -> bool:
    """Do the nonzero values of every exponent region agree on their ``d`` leading mantissa bits?"""
    v = np.asarray(values, dtype=np.float64)
    v = v[v != 0]
    if not v.size:
        return True
    reg = fc.regions(v)
    return all(fc.leading_bits_agree(v[reg == r], d) for r in np.unique(reg))


def forward(ds, technique: Technique | str, param: int, *, checked: bool = False, **kw) -> PreprocessedDataset:
    """Apply ``technique``; ``param`` is ``k`` for compact bins and ``d`` otherwise.

    Datasets whose values are all bit-identical (all zeros, a constant, a
    single sample) already share every bit and map to the identity technique.
    """
    if isinstance(technique, str):
        technique = Technique.from_name(technique)
    arr = validate_dataset(ds)
    if technique is Technique.BINS and param < 1:
        raise ContractError(f"k must be at least 1, got {param}")
    if technique in (Technique.MULSHIFT, Technique.EVENODD, Technique.EVENNESS) and not 1 <= param <= fc.MANTISSA_BITS:
        raise ContractError(f"d={param} outside [1, 52]")
    if technique is Technique.IDENTITY or is_all_equal(arr):
        return identity_forward(arr)
    if technique is Technique.BINS:
        pd = compact_bins_forward(arr, param, kw.pop("d", None), checked=checked)
        d = pd.metadata.d
    elif technique is Technique.MULSHIFT:
        pd = multiply_shift_forward(arr, param, checked=checked, **kw)
        d = param
    elif technique is Technique.EVENODD:
        pd = even_odd_separate_forward(arr, param, checked=checked, **kw)
        d = param
    else:
        pd = save_evenness_forward(arr, param, checked=checked, **kw)
        d = param
    if not shares_leading_bits(pd.values, d):
        raise CheckFailedError(f"{technique.cli_name}: output does not share {d} leading mantissa bits per region")
    return pd


_INVERSES = {
    Technique.BINS: compact_bins_inverse,
    Technique.MULSHIFT: multiply_shift_inverse,
    Technique.EVENODD: even_odd_separate_inverse,
    Technique.EVENNESS: save_evenness_inverse,
}


def inverse(pd: PreprocessedDataset, *, checked: bool = False) -> np.ndarray:
    if pd.technique is Technique.IDENTITY:
        if not isinstance(pd.metadata, IdentityMetadata):
            raise IntegrityError("identity dataset carries technique metadata")
        return identity_inverse(pd)
    try:
        fn = _INVERSES[Technique(pd.technique)]
    except (KeyError, ValueError):
        raise IntegrityError(f"unknown technique {pd.technique!r}") from None
    return fn(pd, checked=checked)
