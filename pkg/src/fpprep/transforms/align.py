"""Exponent alignment: scale every nonzero sample into one region by an exact power of two."""

from __future__ import annotations

import numpy as np

from .. import fp_core as fc
from ..errors import IntegrityError
from .base import AlignmentRecord, validate_dataset, zero_mask


def align_exponents(ds) -> tuple[np.ndarray, AlignmentRecord]:
    """Move nonzero values into the most common exponent region.

    Ties between equally common regions go to the lowest one. Zeros are left
    untouched and recorded.
    """
    arr = validate_dataset(ds)
    zeros = zero_mask(arr)
    out = arr.copy()
    deltas = np.zeros(arr.size, dtype=np.int64)
    nz = ~zeros
    if not nz.any():
        return out, AlignmentRecord(0, tuple(deltas.tolist()), np.packbits(zeros).tobytes())
    reg = fc.regions(arr[nz])
    values, counts = np.unique(reg, return_counts=True)
    e_ref = int(values[np.argmax(counts)])
    deltas[nz] = reg - e_ref
    out[nz] = np.ldexp(arr[nz], -deltas[nz])
    return out, AlignmentRecord(e_ref, tuple(deltas.tolist()), np.packbits(zeros).tobytes())


def unalign(values: np.ndarray, record: AlignmentRecord) -> np.ndarray:
    vals = np.array(values, dtype=np.float64, copy=True)
    if record.is_identity:
        return vals
    if len(record.deltas) != vals.size:
        raise IntegrityError("alignment record length does not match the dataset")
    deltas = np.asarray(record.deltas, dtype=np.int64)
    nz = vals != 0
    vals[nz] = np.ldexp(vals[nz], deltas[nz])
    return vals
