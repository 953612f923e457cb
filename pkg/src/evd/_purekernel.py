"""Pure-Python hashing and scoring kernel.

Reference implementation of the hot path; the Cython twin in
``_fastkernel.pyx`` must produce bit-identical results.
"""

from __future__ import annotations

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def hash64(data: bytes) -> int:
    """64-bit FNV-1a. Stable across platforms and processes."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def hashed_ids(tokens: list, n_slots: int, base: int) -> list:
    """Map each token to base + fnv1a64(utf8) % n_slots."""
    out = []
    for tok in tokens:
        out.append(base + hash64(tok.encode("utf-8")) % n_slots)
    return out


def dot_select(weights, indices) -> float:
    """Sum of weights at the given indices (sparse dot with a count vector)."""
    total = 0.0
    for i in indices:
        total += weights[i]
    return total
