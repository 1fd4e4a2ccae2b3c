"""Lossless preprocessing of float64 arrays for shared-bit compression."""
