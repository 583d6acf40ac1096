"""Spin-register conventions shared by every module.

A register of ``n`` Ising spins is stored as an ``int8`` array of +1/-1
values. Basis index <-> configuration uses a big-endian bit layout (site 0
is the most significant bit) so that the ordering matches ``np.kron`` of
single-site factors, and bit 0 maps to spin +1, bit 1 to spin -1.
"""

from __future__ import annotations

import numpy as np


def bits_to_spins(bits: np.ndarray) -> np.ndarray:
    """Map bits {0, 1} to spins {+1, -1}."""
    return (1 - 2 * np.asarray(bits, dtype=np.int8)).astype(np.int8)


def spins_to_bits(spins: np.ndarray) -> np.ndarray:
    """Map spins {+1, -1} to bits {0, 1}."""
    return ((1 - np.asarray(spins, dtype=np.int8)) // 2).astype(np.int8)


def index_to_spins(index, n: int) -> np.ndarray:
    """Spin configuration(s) for basis index (or array of indices)."""
    index = np.asarray(index, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (index[..., None] >> shifts) & 1
    return bits_to_spins(bits)


def spins_to_index(spins: np.ndarray) -> np.ndarray:
    """Basis index of spin configuration(s); inverse of :func:`index_to_spins`."""
    bits = spins_to_bits(spins).astype(np.int64)
    n = bits.shape[-1]
    weights = np.left_shift(np.int64(1), np.arange(n - 1, -1, -1, dtype=np.int64))
    return bits @ weights


def all_configs(n: int) -> np.ndarray:
    """All ``2**n`` configurations as a ``(2**n, n)`` int8 array, in basis order."""
    return index_to_spins(np.arange(2**n, dtype=np.int64), n)


def site_bit(site: int, n: int) -> int:
    """Bit mask of ``site`` inside an ``n``-site basis index."""
    return 1 << (n - 1 - site)
