# cython: language_level=3
"""Compiled hashing and scoring kernel. Mirrors _purekernel exactly."""

from libc.stdint cimport uint64_t, int64_t

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL


cdef inline uint64_t _fnv1a64(const unsigned char[:] data) nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(data.shape[0]):
        h = (h ^ data[i]) * FNV_PRIME
    return h


def hash64(bytes data):
    """64-bit FNV-1a. Stable across platforms and processes."""
    cdef const unsigned char[:] view = data
    if len(data) == 0:
        return FNV_OFFSET
    return _fnv1a64(view)


def hashed_ids(list tokens, long long n_slots, long long base):
    """Map each token to base + fnv1a64(utf8) % n_slots."""
    cdef list out = []
    cdef bytes raw
    cdef uint64_t h
    for tok in tokens:
        raw = (<str> tok).encode("utf-8")
        if len(raw) == 0:
            h = FNV_OFFSET
        else:
            h = _fnv1a64(raw)
        out.append(base + <long long> (h % <uint64_t> n_slots))
    return out


def dot_select(double[::1] weights, int64_t[::1] indices):
    """Sum of weights at the given indices (sparse dot with a count vector)."""
    cdef double total = 0.0
    cdef Py_ssize_t i
    for i in range(indices.shape[0]):
        total += weights[indices[i]]
    return total
