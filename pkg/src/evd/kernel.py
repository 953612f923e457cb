"""Kernel selection: compiled extension when available, pure Python otherwise.

Both implementations share one contract (FNV-1a 64 hashing, sparse weight
lookup) and are cross-checked in tests; ``KERNEL_BACKEND`` reports which one
is live.
"""

from __future__ import annotations

import numpy as np

try:
    from evd import _fastkernel as _impl

    KERNEL_BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from evd import _purekernel as _impl

    KERNEL_BACKEND = "python"

from evd import _purekernel


def hash64(data: bytes) -> int:
    return _impl.hash64(data)


def hash64_str(text: str) -> int:
    return _impl.hash64(text.encode("utf-8"))


_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    # splitmix64 finalizer: FNV-1a's high bits are poorly mixed for short
    # inputs, which skews threshold-based bucketing without this avalanche.
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK64
    return x ^ (x >> 31)


def stable_unit_interval(text: str) -> float:
    """Deterministic map of a string to [0, 1)."""
    return _mix64(hash64_str(text)) / 2.0**64


def hashed_ids(tokens: list[str], n_slots: int, base: int = 0) -> list[int]:
    return _impl.hashed_ids(tokens, n_slots, base)


def dot_select(weights: np.ndarray, indices) -> float:
    if _impl is _purekernel:
        return _impl.dot_select(weights, indices)
    idx = np.asarray(indices, dtype=np.int64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    return _impl.dot_select(w, idx)


def pure_dot_select(weights, indices) -> float:
    """Always-available reference path, used by tests and benchmarks."""
    return _purekernel.dot_select(weights, indices)


def pure_hashed_ids(tokens: list[str], n_slots: int, base: int = 0) -> list[int]:
    return _purekernel.hashed_ids(tokens, n_slots, base)
