"""Bit-packed binary vectors.

Silhouette data is stored eight pixels per byte in numpy's ``packbits``
layout (most significant bit first, zero padding in the trailing byte).
The padding bits are zero in every vector produced here, and the bitwise
combinators below preserve that, so popcounts never see phantom bits.
"""

import numpy as np


def pack(bits) -> np.ndarray:
    """Pack a boolean (or 0/1) array into uint8 words."""
    return np.packbits(np.asarray(bits).astype(bool))


def unpack(packed: np.ndarray, n_bits: int) -> np.ndarray:
    """Invert :func:`pack`, returning a boolean array of length ``n_bits``."""
    return np.unpackbits(packed, count=n_bits).astype(bool)


def popcount(packed: np.ndarray) -> int:
    return int(np.bitwise_count(packed).sum())


def popcount_xor(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def popcount_and(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(np.bitwise_and(a, b)).sum())


def popcount_andnot(a: np.ndarray, b: np.ndarray) -> int:
    """Number of bits set in ``a`` but not in ``b``."""
    return int(np.bitwise_count(np.bitwise_and(a, np.bitwise_not(b))).sum())
